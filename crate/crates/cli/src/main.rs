fn main() {
    std::process::exit(autossl_cli::run(std::env::args_os()));
}
