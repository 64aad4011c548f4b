use clap::Parser;

fn main() {
    let cli = fracton_cli::Cli::parse();
    match fracton_cli::run(&cli) {
        Ok(text) => print!("{text}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
