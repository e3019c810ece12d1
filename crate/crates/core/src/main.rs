fn main() {
    std::process::exit(qscatter::cli::run(std::env::args_os()));
}
