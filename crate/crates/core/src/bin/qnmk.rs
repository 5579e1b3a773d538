fn main() {
    std::process::exit(qnmk::cli::run(std::env::args_os()));
}
