fn main() {
    std::process::exit(enslab::cli::main(std::env::args_os()));
}
