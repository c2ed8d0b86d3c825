fn main() {
    std::process::exit(putput::cli::main_with(std::env::args_os()));
}
