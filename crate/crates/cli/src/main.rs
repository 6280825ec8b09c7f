fn main() {
    std::process::exit(dosefind_cli::main_with(std::env::args_os()));
}
