fn main() {
    std::process::exit(oamclone::cli::main_with_args(std::env::args_os()));
}
