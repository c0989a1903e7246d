fn main() {
    std::process::exit(realityvote::cli::main_with_args(std::env::args_os()));
}
