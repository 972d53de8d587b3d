fn main() {
    std::process::exit(lrsparse_cli::run(std::env::args_os()));
}
