fn main() {
    std::process::exit(chronodil::cli::main_with(std::env::args_os()));
}
