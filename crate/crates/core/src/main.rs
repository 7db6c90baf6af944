fn main() {
    std::process::exit(topoprompt::cli::run(std::env::args_os()));
}
