fn main() {
    std::process::exit(neurofield::cli::main_with_args(std::env::args_os()));
}
