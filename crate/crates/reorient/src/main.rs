fn main() {
    std::process::exit(reorient::cli::main_with_args(std::env::args_os()));
}
