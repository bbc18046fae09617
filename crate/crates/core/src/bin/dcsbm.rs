use std::process::ExitCode;

fn main() -> ExitCode {
    let outcome = dcsbm::cli::run(std::env::args_os());
    match outcome.payload.get("help").and_then(|h| h.as_str()) {
        Some(help) => print!("{help}"),
        None => println!(
            "{}",
            serde_json::to_string_pretty(&outcome.payload).expect("JSON value serializes")
        ),
    }
    ExitCode::from(outcome.exit_code as u8)
}
