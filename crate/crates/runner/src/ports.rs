use std::collections::HashSet;
use std::net::TcpListener;
use std::sync::Mutex;

/// Ports handed out by this process, so concurrent tests never get the same one.
static ISSUED: Mutex<Option<HashSet<u16>>> = Mutex::new(None);

/// Picks `n` distinct free loopback ports.
pub fn allocate_ports(n: usize) -> std::io::Result<Vec<u16>> {
    let mut issued = ISSUED.lock().unwrap();
    let issued = issued.get_or_insert_with(HashSet::new);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > 1000 {
            return Err(std::io::Error::new(std::io::ErrorKind::AddrInUse, "no free loopback ports"));
        }
        let port = TcpListener::bind("127.0.0.1:0")?.local_addr()?.port();
        if issued.insert(port) {
            out.push(port);
        }
    }
    Ok(out)
}

/// True if some socket is in LISTEN state on `port` (reads /proc/net/tcp{,6}).
pub fn is_listening(port: u16) -> bool {
    ["/proc/net/tcp", "/proc/net/tcp6"].iter().any(|path| {
        std::fs::read_to_string(path).map(|table| listening_in(&table, port)).unwrap_or(false)
    })
}

fn listening_in(table: &str, port: u16) -> bool {
    table.lines().skip(1).any(|line| {
        let mut cols = line.split_whitespace();
        let local = cols.nth(1).unwrap_or("");
        let state = cols.nth(1).unwrap_or("");
        let local_port = local.rsplit(':').next().and_then(|p| u16::from_str_radix(p, 16).ok());
        state == "0A" && local_port == Some(port)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_proc_table() {
        let table = "  sl  local_address rem_address   st tx_queue rx_queue tr tm->when retrnsmt   uid  timeout inode\n   0: 0100007F:1F90 00000000:0000 0A 00000000:00000000 00:00000000 00000000     0        0 1 1\n   1: 0100007F:1F91 0100007F:1F90 01 00000000:00000000 00:00000000 00000000     0        0 1 1\n";
        assert!(listening_in(table, 8080));
        assert!(!listening_in(table, 8081));
    }

    #[test]
    fn detects_real_listener() {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        assert!(is_listening(l.local_addr().unwrap().port()));
    }

    #[test]
    fn allocations_are_distinct() {
        let a = allocate_ports(5).unwrap();
        let b = allocate_ports(5).unwrap();
        let all: HashSet<_> = a.iter().chain(&b).collect();
        assert_eq!(all.len(), 10);
    }
}
