fn main() {
    std::process::exit(speccon_cli::run_cli(std::env::args_os()));
}
