fn main() {
    std::process::exit(integrable_lab::harness::run_cli(std::env::args_os()));
}
