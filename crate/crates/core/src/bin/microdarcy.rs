fn main() {
    std::process::exit(microdarcy::cli::main_with_args(std::env::args()));
}
