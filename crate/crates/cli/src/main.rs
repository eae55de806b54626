fn main() {
    std::process::exit(msnlab_cli::run(std::env::args_os()));
}
