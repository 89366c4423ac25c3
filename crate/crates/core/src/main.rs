fn main() {
    std::process::exit(onestep::cli::main_with_args(std::env::args_os()));
}
