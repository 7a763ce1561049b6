fn main() {
    std::process::exit(bsdp::cli::cli_main(std::env::args_os()));
}
