//! Bitwise CRC-32 over unpacked bit sequences.
//!
//! Polynomial 0x04C11DB7, MSB-first, zero initial value and no final XOR. The
//! zero init keeps the checksum linear over GF(2), so an all-zero payload maps
//! to an all-zero codeword.

const POLY: u32 = 0x04C1_1DB7;

pub fn crc32_bits(bits: &[u8]) -> u32 {
    let mut crc = 0u32;
    for &b in bits {
        let top = (crc >> 31) ^ u32::from(b & 1);
        crc <<= 1;
        if top == 1 {
            crc ^= POLY;
        }
    }
    crc
}

/// Appends the CRC of `bits` as 32 bits, MSB first.
pub fn append_crc32(bits: &mut Vec<u8>) {
    let crc = crc32_bits(bits);
    bits.extend((0..32).rev().map(|i| ((crc >> i) & 1) as u8));
}

/// True when `bits` (payload followed by its 32-bit CRC) checks out.
pub fn check_crc32(bits: &[u8]) -> bool {
    bits.len() >= 32 && crc32_bits(bits) == 0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bytes_to_bits(data: &[u8]) -> Vec<u8> {
        data.iter()
            .flat_map(|&byte| (0..8).rev().map(move |i| (byte >> i) & 1))
            .collect()
    }

    #[test]
    fn known_vector() {
        // CRC-32/MPEG-2 without init/xorout: reference computed bytewise below.
        let msg = bytes_to_bits(b"123456789");
        let mut crc = 0u32;
        for &byte in b"123456789" {
            crc ^= u32::from(byte) << 24;
            for _ in 0..8 {
                crc = if crc & 0x8000_0000 != 0 {
                    (crc << 1) ^ POLY
                } else {
                    crc << 1
                };
            }
        }
        assert_eq!(crc32_bits(&msg), crc);
        assert_eq!(crc, 0x89A1_897F);
    }

    #[test]
    fn append_then_check() {
        let mut bits = bytes_to_bits(b"hello");
        append_crc32(&mut bits);
        assert!(check_crc32(&bits));
        bits[3] ^= 1;
        assert!(!check_crc32(&bits));
    }

    #[test]
    fn zero_payload_zero_crc() {
        assert_eq!(crc32_bits(&[0; 100]), 0);
    }
}
