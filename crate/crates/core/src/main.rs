fn main() {
    std::process::exit(semilab::cli::main_with(std::env::args_os()));
}
