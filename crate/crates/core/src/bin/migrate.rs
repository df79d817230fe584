fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(apimorph::cli::run(&argv));
}
