fn main() {
    std::process::exit(merlean::cli::main_with(std::env::args_os()));
}
