fn main() {
    std::process::exit(etflock::cli::main_with_args(std::env::args_os()));
}
