fn main() {
    std::process::exit(quasinorm::harness::main_with_args(std::env::args_os()));
}
