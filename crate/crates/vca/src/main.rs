fn main() {
    std::process::exit(vca::cli::main_with(std::env::args_os()));
}
