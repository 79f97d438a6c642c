fn main() {
    std::process::exit(locstat::cli::main_with(std::env::args_os()));
}
