fn main() {
    std::process::exit(qdtrace::cli::run(std::env::args_os()));
}
