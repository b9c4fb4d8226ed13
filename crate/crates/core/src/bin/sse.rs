fn main() {
    std::process::exit(sse_denoise::cli::run_args(std::env::args().skip(1)));
}
