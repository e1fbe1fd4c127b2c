fn main() {
    std::process::exit(stochnewton::cli::run(std::env::args_os()));
}
