fn main() {
    std::process::exit(desynclab_cli::main_with_args(std::env::args_os()));
}
