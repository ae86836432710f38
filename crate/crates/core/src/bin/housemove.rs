fn main() {
    std::process::exit(housemove::cli::main_with_args(std::env::args_os()));
}
