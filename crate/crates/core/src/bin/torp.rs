fn main() {
    std::process::exit(torp::harness::cli_main(std::env::args_os()));
}
