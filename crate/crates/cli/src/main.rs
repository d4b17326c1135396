fn main() {
    std::process::exit(nls_sharp_cli::run_cli(std::env::args_os()));
}
