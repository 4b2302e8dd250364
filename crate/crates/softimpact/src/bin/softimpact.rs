fn main() {
    std::process::exit(softimpact::cli::main_with_args(std::env::args_os()));
}
