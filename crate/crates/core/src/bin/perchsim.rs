fn main() {
    std::process::exit(perchsim::cli::main_with_args(std::env::args_os()));
}
