use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use por_core::crypto::{
    backup_key, decode_message, ec_decrypt, ec_encrypt, encode_message, keygen, message_capacity, restore_key,
    scalar_mul, Ciphertext, CryptoError, KeyFile,
};
use por_core::macau::decode_hex_strict;
use por_core::{CurveParams, EntropySource, KeyPair};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::Format;
use crate::error::{read, read_text, write, CliError, CliResult};

#[derive(Subcommand, Debug, Clone)]
pub enum KeysCmd {
    /// Generate a keypair file
    Gen {
        #[arg(long)]
        out: PathBuf,
        /// toy17, test64 or secp256k1
        #[arg(long, default_value = "secp256k1")]
        curve: String,
        /// Seeded generation; OS entropy otherwise
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Encrypt a file to a key's public point
    Encrypt {
        #[arg(long)]
        key: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Decrypt a ciphertext file with a key's private scalar
    Decrypt {
        #[arg(long)]
        key: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// XOR the private scalar with a pad file of the same width
    Backup {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        pad: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover a keypair file from a backup and its pad
    Restore {
        #[arg(long)]
        backup: PathBuf,
        #[arg(long)]
        pad: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct KeysArgs {
    #[command(subcommand)]
    pub cmd: KeysCmd,
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,
}

/// Messages longer than one point's capacity are split into chunks.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CiphertextFile {
    curve: String,
    chunks: Vec<ChunkHex>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChunkHex {
    e1: String,
    e2: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BackupFile {
    curve: String,
    backup: String,
}

fn crypto_error(e: CryptoError) -> CliError {
    match e {
        CryptoError::KeyLengthMismatch { .. } | CryptoError::MessageTooLong { .. } | CryptoError::UnknownCurve(_) => {
            CliError::config(e)
        }
        other => CliError::runtime(other),
    }
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn source(seed: Option<u64>) -> EntropySource {
    seed.map(EntropySource::seeded).unwrap_or_else(EntropySource::os)
}

fn load_key(path: &Path) -> CliResult<(KeyPair, CurveParams)> {
    parse_json::<KeyFile>(path)?
        .to_pair()
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn write_key(path: &Path, pair: &KeyPair, params: &CurveParams) -> CliResult<()> {
    let file = KeyFile::from_pair(pair, params);
    write(
        path,
        serde_json::to_string_pretty(&file).expect("plain data serializes") + "\n",
    )
}

fn hex_field(s: &str, what: &str) -> CliResult<Vec<u8>> {
    decode_hex_strict(s).map_err(|e| CliError::runtime(format!("{what}: {e}")))
}

fn run(cmd: &KeysCmd) -> CliResult<serde_json::Value> {
    match cmd {
        KeysCmd::Gen { out, curve, seed } => {
            let params = CurveParams::by_name(curve).map_err(crypto_error)?;
            let pair = keygen(&mut source(*seed), &params).map_err(crypto_error)?;
            write_key(out, &pair, &params)?;
            Ok(json!({ "command": "gen", "curve": params.name, "out": out }))
        }
        KeysCmd::Encrypt { key, input, out, seed } => {
            let (pair, params) = load_key(key)?;
            let msg = read(input)?;
            let mut src = source(*seed);
            let cap = message_capacity(&params);
            if cap == 0 {
                return Err(CliError::config(format!("curve {} cannot carry messages", params.name)));
            }
            let pieces: Vec<&[u8]> = if msg.is_empty() {
                vec![&[]]
            } else {
                msg.chunks(cap).collect()
            };
            let mut chunks = Vec::with_capacity(pieces.len());
            for piece in pieces {
                let d = encode_message(piece, &params).map_err(crypto_error)?;
                let ct = ec_encrypt(&pair.public, &mut src, &d, &params).map_err(crypto_error)?;
                chunks.push(ChunkHex {
                    e1: hex::encode(params.encode_point(&ct.e1)),
                    e2: hex::encode(params.encode_point(&ct.e2)),
                });
            }
            let n = chunks.len();
            let file = CiphertextFile {
                curve: params.name.clone(),
                chunks,
            };
            write(
                out,
                serde_json::to_string_pretty(&file).expect("plain data serializes") + "\n",
            )?;
            Ok(json!({ "command": "encrypt", "bytes": msg.len(), "chunks": n, "out": out }))
        }
        KeysCmd::Decrypt { key, input, out } => {
            let (pair, params) = load_key(key)?;
            let file: CiphertextFile = parse_json(input)?;
            if file.curve != params.name {
                return Err(CliError::config(format!(
                    "ciphertext is for curve {}, key is for {}",
                    file.curve, params.name
                )));
            }
            let mut msg = Vec::new();
            for c in &file.chunks {
                let point = |s: &str| -> CliResult<_> {
                    params
                        .decode_point(&hex_field(s, "ciphertext point")?)
                        .map_err(crypto_error)
                };
                let ct = Ciphertext {
                    e1: point(&c.e1)?,
                    e2: point(&c.e2)?,
                };
                let d = ec_decrypt(&ct, &pair.k, &params).map_err(crypto_error)?;
                msg.extend(decode_message(&d, &params).map_err(crypto_error)?);
            }
            write(out, &msg)?;
            Ok(json!({ "command": "decrypt", "bytes": msg.len(), "out": out }))
        }
        KeysCmd::Backup { key, pad, out } => {
            let (pair, params) = load_key(key)?;
            let backup = backup_key(&pair.k, &read(pad)?, &params).map_err(crypto_error)?;
            let file = BackupFile {
                curve: params.name.clone(),
                backup: hex::encode(backup),
            };
            write(
                out,
                serde_json::to_string_pretty(&file).expect("plain data serializes") + "\n",
            )?;
            Ok(json!({ "command": "backup", "curve": params.name, "out": out }))
        }
        KeysCmd::Restore { backup, pad, out } => {
            let file: BackupFile = parse_json(backup)?;
            let params = CurveParams::by_name(&file.curve).map_err(crypto_error)?;
            let k = restore_key(&hex_field(&file.backup, "backup")?, &read(pad)?, &params).map_err(crypto_error)?;
            if k.is_zero() || k >= params.order {
                return Err(CliError::runtime("restored scalar is out of range; wrong pad?"));
            }
            let public = scalar_mul(&k, &params.g, &params).map_err(crypto_error)?;
            write_key(out, &KeyPair { k, public }, &params)?;
            Ok(json!({ "command": "restore", "curve": params.name, "out": out }))
        }
    }
}

pub fn cmd_keys(args: &KeysArgs) -> CliResult<String> {
    let summary = run(&args.cmd)?;
    Ok(match args.format {
        Format::Json => summary.to_string() + "\n",
        _ => {
            let extra: Vec<String> = summary
                .as_object()
                .expect("summary is an object")
                .iter()
                .filter(|(k, _)| k.as_str() != "command")
                .map(|(k, v)| {
                    format!(
                        "{k}={}",
                        v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string())
                    )
                })
                .collect();
            format!(
                "{} ok: {}\n",
                summary["command"].as_str().unwrap_or(""),
                extra.join(" ")
            )
        }
    })
}
