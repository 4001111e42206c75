//! Mnemonic extraction from GNU objdump `-d` listings (AT&T layout).

/// Result of scanning one disassembly listing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedDisassembly {
    pub mnemonics: Vec<String>,
    /// Lines that matched none of the known listing shapes.
    pub unparsed_lines: usize,
    /// Instruction lines whose instruction field was `(bad)`.
    pub bad_instructions: usize,
}

fn is_hex(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_hexdigit())
}

fn is_byte_column(field: &str) -> bool {
    let mut tokens = field.split_whitespace().peekable();
    tokens.peek().is_some() && tokens.all(|t| t.len() == 2 && is_hex(t))
}

enum Line<'a> {
    Skip,
    Instruction(&'a str),
    Bad,
    Unparsed,
}

fn classify(line: &str) -> Line<'_> {
    let trimmed = line.trim();
    if trimmed.is_empty()
        || trimmed == "..."
        || trimmed.starts_with("Disassembly of section")
        || trimmed.contains("file format")
    {
        return Line::Skip;
    }

    let Some((addr, rest)) = trimmed.split_once(':') else {
        return Line::Unparsed;
    };
    // symbol label: `00401000 <_start>:`
    if rest.is_empty() {
        if let Some((a, sym)) = addr.split_once(' ') {
            if is_hex(a) && sym.starts_with('<') && sym.ends_with('>') {
                return Line::Skip;
            }
        }
        return Line::Unparsed;
    }
    if !is_hex(addr) {
        return Line::Unparsed;
    }

    let mut fields = rest.split('\t').map(str::trim).filter(|f| !f.is_empty());
    let Some(first) = fields.next() else {
        return Line::Unparsed;
    };
    let insn = if is_byte_column(first) {
        match fields.next() {
            Some(f) => f,
            // continuation of a long encoding, bytes only
            None => return Line::Skip,
        }
    } else {
        first
    };
    let Some(mnemonic) = insn.split_whitespace().next() else {
        return Line::Skip;
    };
    if mnemonic == "(bad)" {
        return Line::Bad;
    }
    Line::Instruction(mnemonic)
}

/// Extracts instruction mnemonics, in file order, from objdump text.
///
/// Never fails: lines that do not look like objdump output are counted in
/// [`ParsedDisassembly::unparsed_lines`].
pub fn parse_disassembly(text: &str) -> ParsedDisassembly {
    let mut out = ParsedDisassembly::default();
    for line in text.lines() {
        match classify(line) {
            Line::Skip => {}
            Line::Instruction(m) => out.mnemonics.push(m.to_ascii_lowercase()),
            Line::Bad => out.bad_instructions += 1,
            Line::Unparsed => out.unparsed_lines += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HELLO: &str = "
hello.exe:     file format pei-i386


Disassembly of section .text:

00401000 <_mainCRTStartup>:
  401000:\t55                   \tpush   %ebp
  401001:\t89 e5                \tmov    %esp,%ebp
  401003:\t83 ec 18             \tsub    $0x18,%esp
  401006:\tc7 04 24 01 00 00 00 \tmovl   $0x1,(%esp)
  40100d:\tff 15 00 00 00 00    \tcall   *0x0
  401013:\te8 00 00 00 00       \tcall   401018 <___main>
  401018:\tf3 ab                \trep stos %eax,%es:(%edi)
  40101a:\tf0                   \tlock
  40101b:\t0f c1 02             \txadd   %eax,(%edx)
  40101e:\tc9                   \tleave
  40101f:\tc3                   \tret
\t...
  401030:\tff                   \t(bad)
  401031:\tc7 05 00 30 40 00 01 \tmovl   $0x1,0x403000
  401038:\t00 00 00 
";

    #[test]
    fn single_push_line() {
        let p = parse_disassembly("  401000:\t55 \tpush   %ebp");
        assert_eq!(p.mnemonics, vec!["push"]);
        assert_eq!(p.unparsed_lines, 0);
    }

    #[test]
    fn section_header_is_skipped() {
        let p = parse_disassembly("Disassembly of section .text:");
        assert!(p.mnemonics.is_empty());
        assert_eq!(p.unparsed_lines, 0);
    }

    #[test]
    fn order_preserved() {
        let p = parse_disassembly("  1:\t55\tpush %ebp\n  2:\t89 e5\tmov %esp,%ebp\n");
        assert_eq!(p.mnemonics, vec!["push", "mov"]);
    }

    #[test]
    fn full_listing() {
        let p = parse_disassembly(HELLO);
        assert_eq!(
            p.mnemonics,
            vec![
                "push", "mov", "sub", "movl", "call", "call", "rep", "lock", "xadd", "leave",
                "ret", "movl"
            ]
        );
        assert_eq!(p.bad_instructions, 1);
        assert_eq!(p.unparsed_lines, 0);
    }

    #[test]
    fn raw_insn_column_optional() {
        let p = parse_disassembly("  401000:\tPUSH   %ebp\n  401001:\tmov %esp,%ebp");
        assert_eq!(p.mnemonics, vec!["push", "mov"]);
    }

    #[test]
    fn garbage_is_counted_not_fatal() {
        let p = parse_disassembly("hello world\nzz: nope\n  401000:\t55\tpush %ebp\n");
        assert_eq!(p.mnemonics, vec!["push"]);
        assert_eq!(p.unparsed_lines, 2);
    }

    proptest! {
        #[test]
        fn total_and_bounded(text in "\\PC{0,400}") {
            let p = parse_disassembly(&text);
            prop_assert!(p.mnemonics.len() <= text.lines().count());
        }

        #[test]
        fn bounded_on_listing_like_text(
            lines in proptest::collection::vec("[ 0-9a-f:\\t<>(),%$a-z.]{0,40}", 0..30)
        ) {
            let text = lines.join("\n");
            let p = parse_disassembly(&text);
            prop_assert!(p.mnemonics.len() <= lines.len());
            prop_assert!(p.mnemonics.iter().all(|m| !m.is_empty() && !m.contains(char::is_whitespace)));
        }
    }
}
