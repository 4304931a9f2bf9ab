fn main() {
    std::process::exit(bugsynth_cli::main_with_args(std::env::args_os()));
}
