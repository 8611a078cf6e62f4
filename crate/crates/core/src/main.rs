fn main() {
    std::process::exit(sticky_lab::cli::main_with_args(std::env::args_os()));
}
