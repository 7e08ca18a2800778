fn main() {
    std::process::exit(genpoisson_cli::run(std::env::args_os()));
}
