use tree_sitter::Language;

/// What the indexer needs to know about a source language.
#[derive(Debug, Clone)]
pub struct LanguageProfile {
    pub name: &'static str,
    pub extensions: &'static [&'static str],
    pub language: fn() -> Language,
    /// Identifiers provided by the language or its standard headers; never
    /// reported as dependencies.
    pub builtins: &'static [&'static str],
}

impl LanguageProfile {
    pub fn c() -> LanguageProfile {
        LanguageProfile { name: "c", extensions: &["c", "h"], language: c_language, builtins: C_BUILTINS }
    }

    pub fn handles(&self, path: &std::path::Path) -> bool {
        path.extension().and_then(|e| e.to_str()).is_some_and(|e| self.extensions.contains(&e))
    }

    pub fn is_builtin(&self, name: &str) -> bool {
        self.builtins.binary_search(&name).is_ok()
    }
}

impl Default for LanguageProfile {
    fn default() -> Self {
        LanguageProfile::c()
    }
}

fn c_language() -> Language {
    tree_sitter_c::LANGUAGE.into()
}

// Sorted for binary search.
const C_BUILTINS: &[&str] = &[
    "AF_INET",
    "AF_INET6",
    "CMSG_DATA",
    "CMSG_FIRSTHDR",
    "CMSG_LEN",
    "CMSG_NXTHDR",
    "CMSG_SPACE",
    "EAGAIN",
    "EINTR",
    "EINVAL",
    "ENOMEM",
    "EOF",
    "EWOULDBLOCK",
    "FILE",
    "INT16_MAX",
    "INT32_MAX",
    "INT64_MAX",
    "INT8_MAX",
    "IPPROTO_IP",
    "IPPROTO_IPV6",
    "IPV6_HOPLIMIT",
    "IPV6_PKTINFO",
    "IP_PKTINFO",
    "IP_TTL",
    "MSG_DONTWAIT",
    "MSG_PEEK",
    "MSG_TRUNC",
    "NULL",
    "SIZE_MAX",
    "UINT16_MAX",
    "UINT32_MAX",
    "UINT64_MAX",
    "UINT8_MAX",
    "__func__",
    "abort",
    "assert",
    "bool",
    "calloc",
    "cmsghdr",
    "errno",
    "exit",
    "false",
    "fprintf",
    "free",
    "fwrite",
    "getenv",
    "htonl",
    "htons",
    "in6_addr",
    "in6_pktinfo",
    "in_addr",
    "in_pktinfo",
    "iovec",
    "malloc",
    "memcmp",
    "memcpy",
    "memmove",
    "memset",
    "msghdr",
    "ntohl",
    "ntohs",
    "offsetof",
    "printf",
    "read",
    "realloc",
    "recv",
    "recvfrom",
    "recvmsg",
    "size_t",
    "snprintf",
    "sockaddr",
    "sockaddr_in",
    "sockaddr_in6",
    "sockaddr_storage",
    "socklen_t",
    "ssize_t",
    "stderr",
    "stdin",
    "stdout",
    "strcmp",
    "strerror",
    "strlen",
    "strncmp",
    "strncpy",
    "true",
    "va_end",
    "va_list",
    "va_start",
    "write",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_sorted_and_unique() {
        assert!(C_BUILTINS.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn c_profile_handles_headers_and_sources() {
        let p = LanguageProfile::c();
        assert!(p.handles("a/b.c".as_ref()));
        assert!(p.handles("x.h".as_ref()));
        assert!(!p.handles("README.md".as_ref()));
    }
}
