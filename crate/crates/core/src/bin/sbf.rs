fn main() {
    std::process::exit(smooth_backfit::cli::run(std::env::args_os()));
}
