//! Character n-grams of boundary-marked words, hashed into buckets.

const BOW: char = '<';
const EOW: char = '>';

/// 32-bit FNV-1a over the bytes of `s`, with bytes sign-extended before
/// mixing so that hashes agree with the reference subword model.
pub fn fnv1a(s: &str) -> u32 {
    let mut h: u32 = 2_166_136_261;
    for &b in s.as_bytes() {
        h ^= b as i8 as i32 as u32;
        h = h.wrapping_mul(16_777_619);
    }
    h
}

/// Character n-grams of `<token>` with lengths in `min_n..=max_n`.
pub fn ngrams(token: &str, min_n: usize, max_n: usize) -> Vec<String> {
    let marked: Vec<char> = std::iter::once(BOW)
        .chain(token.chars())
        .chain(std::iter::once(EOW))
        .collect();
    let len = marked.len();
    let mut out = Vec::new();
    for start in 0..len {
        let mut gram = String::new();
        for (n, &c) in marked[start..].iter().enumerate().take(max_n) {
            gram.push(c);
            let n = n + 1;
            let end = start + n;
            // Single boundary markers are not n-grams.
            if n >= min_n && !(n == 1 && (start == 0 || end == len)) {
                out.push(gram.clone());
            }
        }
    }
    out
}

pub fn ngram_buckets(token: &str, min_n: usize, max_n: usize, buckets: usize) -> Vec<u32> {
    ngrams(token, min_n, max_n)
        .iter()
        .map(|g| (fnv1a(g) as u64 % buckets as u64) as u32)
        .collect()
}
