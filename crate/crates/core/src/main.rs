fn main() {
    std::process::exit(hsketch::cli::main_with_args(std::env::args_os()));
}
