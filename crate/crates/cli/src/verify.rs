use std::path::PathBuf;

use clap::Args;
use por_core::ledger::{load_chain, validate_chain};
use por_core::KeyDirectory;
use serde_json::json;

use crate::config::Format;
use crate::error::{read_text, CliError, CliResult};

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[arg(long)]
    pub chain: PathBuf,
    /// Node public keys written by `simulate --keys`
    #[arg(long)]
    pub keys: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

/// Returns the rendered verdict and whether the chain is valid.
pub fn cmd_verify(args: &VerifyArgs) -> CliResult<(String, bool)> {
    let keys = KeyDirectory::from_json(&read_text(&args.keys)?)
        .map_err(|e| CliError::runtime(format!("{}: {e}", args.keys.display())))?;
    let chain = load_chain(&args.chain).map_err(CliError::runtime)?;
    let verdict = validate_chain(&chain, &keys);
    let out = match (&verdict, args.format) {
        (Ok(()), Format::Json) => json!({ "ok": true, "blocks": chain.len() }).to_string(),
        (Err(r), Format::Json) => {
            json!({ "ok": false, "height": r.height, "reason": r.reason.to_string() }).to_string()
        }
        (Ok(()), Format::Csv) => "ok,height,reason\ntrue,,\n".to_string(),
        (Err(r), Format::Csv) => format!("ok,height,reason\nfalse,{},{}\n", r.height, r.reason),
        (Ok(()), Format::Text) => format!("ok: {} blocks", chain.len()),
        (Err(r), Format::Text) => format!("invalid at height {}: {}", r.height, r.reason),
    };
    let out = if out.ends_with('\n') { out } else { out + "\n" };
    Ok((out, verdict.is_ok()))
}
