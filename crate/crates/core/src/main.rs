fn main() {
    std::process::exit(gchain::cli::dispatch(std::env::args_os()));
}
