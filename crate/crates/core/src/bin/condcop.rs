fn main() {
    std::process::exit(condcop::cli::main_with_args(std::env::args_os()));
}
