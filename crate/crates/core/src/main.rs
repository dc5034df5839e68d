fn main() {
    std::process::exit(qdent::cli::run(std::env::args_os()));
}
