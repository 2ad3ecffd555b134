fn main() {
    std::process::exit(sdcbf::cli::main_with_args(std::env::args_os()));
}
