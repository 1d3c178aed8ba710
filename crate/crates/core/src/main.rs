fn main() {
    std::process::exit(thz_qkd::cli::run_cli(std::env::args_os()));
}
