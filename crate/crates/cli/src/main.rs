fn main() {
    std::process::exit(intff_cli::run(std::env::args_os()));
}
