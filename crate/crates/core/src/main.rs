fn main() {
    std::process::exit(degenhom::cli::main_with_args(std::env::args_os()));
}
