fn main() {
    std::process::exit(oceanmdp::cli::main_with_args(std::env::args_os()));
}
