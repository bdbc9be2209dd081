fn main() {
    std::process::exit(binarykin::cli::dispatch(std::env::args_os()));
}
