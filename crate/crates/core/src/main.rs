fn main() {
    std::process::exit(martensim::cli::main_with_args(std::env::args_os()));
}
