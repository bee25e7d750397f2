fn main() {
    std::process::exit(rtcable::cli::main_with_args(std::env::args_os()));
}
