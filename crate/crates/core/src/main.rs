fn main() {
    std::process::exit(dcsc::cli::run(std::env::args_os()));
}
