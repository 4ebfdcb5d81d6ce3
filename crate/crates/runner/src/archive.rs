//! Submission archives are gzip-compressed tarballs of the bundle root.

use std::io::{self, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

/// Archives above this size are refused.
pub const MAX_ARCHIVE_BYTES: usize = 64 << 20;

pub fn pack_dir(dir: &Path) -> io::Result<Vec<u8>> {
    let enc = GzEncoder::new(Vec::new(), Compression::default());
    let mut builder = tar::Builder::new(enc);
    builder.follow_symlinks(false);
    builder.append_dir_all(".", dir)?;
    builder.into_inner()?.finish()
}

/// Reads every entry header without extracting, so a corrupt upload can be
/// refused before it is stored.
pub fn validate(bytes: &[u8]) -> io::Result<()> {
    if bytes.len() > MAX_ARCHIVE_BYTES {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "archive too large"));
    }
    let mut archive = tar::Archive::new(GzDecoder::new(bytes).take(4 * MAX_ARCHIVE_BYTES as u64));
    for entry in archive.entries()? {
        io::copy(&mut entry?, &mut io::sink())?;
    }
    Ok(())
}

/// Unpacks into `dest`. Entries escaping `dest` are skipped by `tar`.
pub fn unpack(bytes: &[u8], dest: &Path) -> io::Result<()> {
    if bytes.len() > MAX_ARCHIVE_BYTES {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "archive too large"));
    }
    std::fs::create_dir_all(dest)?;
    let mut archive = tar::Archive::new(GzDecoder::new(bytes).take(4 * MAX_ARCHIVE_BYTES as u64));
    archive.set_preserve_permissions(true);
    for entry in archive.entries()? {
        let mut entry = entry?;
        entry.unpack_in(dest)?;
    }
    Ok(())
}
