#include "evmtaint/bytecode.hpp"

#include "evmtaint/constfold.hpp"
#include "evmtaint/keccak.hpp"

#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace evmtaint {

const char* to_string(OpcodeClass c) {
  switch (c) {
    case OpcodeClass::StackOnly: return "stack";
    case OpcodeClass::LoadStore: return "load-store";
    case OpcodeClass::Call: return "call";
    case OpcodeClass::ControlFlow: return "control-flow";
    case OpcodeClass::Environment: return "environment";
    case OpcodeClass::Halt: return "halt";
    case OpcodeClass::Invalid: return "invalid";
  }
  return "?";
}

namespace {

struct OpcodeTable {
  std::array<OpcodeInfo, 256> entries;
  // Names for unknown byte values live here so OpcodeInfo::name stays a
  // plain pointer.
  std::array<std::array<char, 11>, 256> invalid_names;

  OpcodeTable() {
    for (int i = 0; i < 256; ++i) {
      std::snprintf(invalid_names[i].data(), invalid_names[i].size(),
                    "INVALID_%02x", i);
      entries[i] = {invalid_names[i].data(), 0, 0, 0, OpcodeClass::Invalid, false};
    }
    auto set = [&](uint8_t o, const char* name, uint8_t pops, uint8_t pushes,
                   OpcodeClass k, uint8_t imm = 0) {
      entries[o] = {name, pops, pushes, imm, k, true};
    };
    using K = OpcodeClass;
    set(op::STOP, "STOP", 0, 0, K::Halt);
    set(op::ADD, "ADD", 2, 1, K::StackOnly);
    set(op::MUL, "MUL", 2, 1, K::StackOnly);
    set(op::SUB, "SUB", 2, 1, K::StackOnly);
    set(op::DIV, "DIV", 2, 1, K::StackOnly);
    set(op::SDIV, "SDIV", 2, 1, K::StackOnly);
    set(op::MOD, "MOD", 2, 1, K::StackOnly);
    set(op::SMOD, "SMOD", 2, 1, K::StackOnly);
    set(op::ADDMOD, "ADDMOD", 3, 1, K::StackOnly);
    set(op::MULMOD, "MULMOD", 3, 1, K::StackOnly);
    set(op::EXP, "EXP", 2, 1, K::StackOnly);
    set(op::SIGNEXTEND, "SIGNEXTEND", 2, 1, K::StackOnly);
    set(op::LT, "LT", 2, 1, K::StackOnly);
    set(op::GT, "GT", 2, 1, K::StackOnly);
    set(op::SLT, "SLT", 2, 1, K::StackOnly);
    set(op::SGT, "SGT", 2, 1, K::StackOnly);
    set(op::EQ, "EQ", 2, 1, K::StackOnly);
    set(op::ISZERO, "ISZERO", 1, 1, K::StackOnly);
    set(op::AND, "AND", 2, 1, K::StackOnly);
    set(op::OR, "OR", 2, 1, K::StackOnly);
    set(op::XOR, "XOR", 2, 1, K::StackOnly);
    set(op::NOT, "NOT", 1, 1, K::StackOnly);
    set(op::BYTE, "BYTE", 2, 1, K::StackOnly);
    set(op::SHL, "SHL", 2, 1, K::StackOnly);
    set(op::SHR, "SHR", 2, 1, K::StackOnly);
    set(op::SAR, "SAR", 2, 1, K::StackOnly);
    set(op::KECCAK256, "KECCAK256", 2, 1, K::LoadStore);
    set(op::ADDRESS, "ADDRESS", 0, 1, K::Environment);
    set(op::BALANCE, "BALANCE", 1, 1, K::Environment);
    set(op::ORIGIN, "ORIGIN", 0, 1, K::Environment);
    set(op::CALLER, "CALLER", 0, 1, K::Environment);
    set(op::CALLVALUE, "CALLVALUE", 0, 1, K::Environment);
    set(op::CALLDATALOAD, "CALLDATALOAD", 1, 1, K::LoadStore);
    set(op::CALLDATASIZE, "CALLDATASIZE", 0, 1, K::Environment);
    set(op::CALLDATACOPY, "CALLDATACOPY", 3, 0, K::LoadStore);
    set(op::CODESIZE, "CODESIZE", 0, 1, K::Environment);
    set(op::CODECOPY, "CODECOPY", 3, 0, K::LoadStore);
    set(op::GASPRICE, "GASPRICE", 0, 1, K::Environment);
    set(op::EXTCODESIZE, "EXTCODESIZE", 1, 1, K::Environment);
    set(op::EXTCODECOPY, "EXTCODECOPY", 4, 0, K::LoadStore);
    set(op::RETURNDATASIZE, "RETURNDATASIZE", 0, 1, K::Environment);
    set(op::RETURNDATACOPY, "RETURNDATACOPY", 3, 0, K::LoadStore);
    set(op::EXTCODEHASH, "EXTCODEHASH", 1, 1, K::Environment);
    set(op::BLOCKHASH, "BLOCKHASH", 1, 1, K::Environment);
    set(0x41, "COINBASE", 0, 1, K::Environment);
    set(0x42, "TIMESTAMP", 0, 1, K::Environment);
    set(0x43, "NUMBER", 0, 1, K::Environment);
    set(0x44, "PREVRANDAO", 0, 1, K::Environment);
    set(0x45, "GASLIMIT", 0, 1, K::Environment);
    set(0x46, "CHAINID", 0, 1, K::Environment);
    set(op::SELFBALANCE, "SELFBALANCE", 0, 1, K::Environment);
    set(0x48, "BASEFEE", 0, 1, K::Environment);
    set(op::BLOBHASH, "BLOBHASH", 1, 1, K::Environment);
    set(0x4a, "BLOBBASEFEE", 0, 1, K::Environment);
    set(op::POP, "POP", 1, 0, K::StackOnly);
    set(op::MLOAD, "MLOAD", 1, 1, K::LoadStore);
    set(op::MSTORE, "MSTORE", 2, 0, K::LoadStore);
    set(op::MSTORE8, "MSTORE8", 2, 0, K::LoadStore);
    set(op::SLOAD, "SLOAD", 1, 1, K::LoadStore);
    set(op::SSTORE, "SSTORE", 2, 0, K::LoadStore);
    set(op::JUMP, "JUMP", 1, 0, K::ControlFlow);
    set(op::JUMPI, "JUMPI", 2, 0, K::ControlFlow);
    set(op::PC, "PC", 0, 1, K::Environment);
    set(op::MSIZE, "MSIZE", 0, 1, K::Environment);
    set(op::GAS, "GAS", 0, 1, K::Environment);
    set(op::JUMPDEST, "JUMPDEST", 0, 0, K::ControlFlow);
    set(op::TLOAD, "TLOAD", 1, 1, K::LoadStore);
    set(op::TSTORE, "TSTORE", 2, 0, K::LoadStore);
    set(op::MCOPY, "MCOPY", 3, 0, K::LoadStore);
    set(op::PUSH0, "PUSH0", 0, 1, K::StackOnly);

    static const char* push_names[32] = {
        "PUSH1",  "PUSH2",  "PUSH3",  "PUSH4",  "PUSH5",  "PUSH6",  "PUSH7",
        "PUSH8",  "PUSH9",  "PUSH10", "PUSH11", "PUSH12", "PUSH13", "PUSH14",
        "PUSH15", "PUSH16", "PUSH17", "PUSH18", "PUSH19", "PUSH20", "PUSH21",
        "PUSH22", "PUSH23", "PUSH24", "PUSH25", "PUSH26", "PUSH27", "PUSH28",
        "PUSH29", "PUSH30", "PUSH31", "PUSH32"};
    static const char* dup_names[16] = {
        "DUP1", "DUP2",  "DUP3",  "DUP4",  "DUP5",  "DUP6",  "DUP7",  "DUP8",
        "DUP9", "DUP10", "DUP11", "DUP12", "DUP13", "DUP14", "DUP15", "DUP16"};
    static const char* swap_names[16] = {
        "SWAP1", "SWAP2",  "SWAP3",  "SWAP4",  "SWAP5",  "SWAP6",
        "SWAP7", "SWAP8",  "SWAP9",  "SWAP10", "SWAP11", "SWAP12",
        "SWAP13", "SWAP14", "SWAP15", "SWAP16"};
    static const char* log_names[5] = {"LOG0", "LOG1", "LOG2", "LOG3", "LOG4"};

    for (int i = 0; i < 32; ++i)
      set(static_cast<uint8_t>(op::PUSH1 + i), push_names[i], 0, 1,
          K::StackOnly, static_cast<uint8_t>(i + 1));
    for (int i = 0; i < 16; ++i)
      set(static_cast<uint8_t>(op::DUP1 + i), dup_names[i],
          static_cast<uint8_t>(i + 1), static_cast<uint8_t>(i + 2),
          K::StackOnly);
    for (int i = 0; i < 16; ++i)
      set(static_cast<uint8_t>(op::SWAP1 + i), swap_names[i],
          static_cast<uint8_t>(i + 2), static_cast<uint8_t>(i + 2),
          K::StackOnly);
    for (int i = 0; i < 5; ++i)
      set(static_cast<uint8_t>(op::LOG0 + i), log_names[i],
          static_cast<uint8_t>(i + 2), 0, K::LoadStore);

    set(op::CREATE, "CREATE", 3, 1, K::Call);
    set(op::CALL, "CALL", 7, 1, K::Call);
    set(op::CALLCODE, "CALLCODE", 7, 1, K::Call);
    set(op::RETURN, "RETURN", 2, 0, K::Halt);
    set(op::DELEGATECALL, "DELEGATECALL", 6, 1, K::Call);
    set(op::CREATE2, "CREATE2", 4, 1, K::Call);
    set(op::STATICCALL, "STATICCALL", 6, 1, K::Call);
    set(op::REVERT, "REVERT", 2, 0, K::Halt);
    set(op::INVALID, "INVALID", 0, 0, K::Halt);
    set(op::SELFDESTRUCT, "SELFDESTRUCT", 1, 0, K::Call);
  }
};

const OpcodeTable& table() {
  static const OpcodeTable t;
  return t;
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

const OpcodeInfo& opcode_info(uint8_t opcode) { return table().entries[opcode]; }

DecodeError::DecodeError(DecodeErrorKind kind, size_t position)
    : std::runtime_error(kind == DecodeErrorKind::OddLength
                             ? "odd number of hex digits at position " +
                                   std::to_string(position)
                             : "non-hex character at position " +
                                   std::to_string(position)),
      kind_(kind),
      position_(position) {}

RawCode decode_hex(const std::string& text, CodeOrigin origin) {
  size_t begin = 0, end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin])))
    ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1])))
    --end;
  std::string trimmed = text.substr(begin, end - begin);

  size_t pos = 0;
  if (trimmed.size() >= 2 && trimmed[0] == '0' &&
      (trimmed[1] == 'x' || trimmed[1] == 'X'))
    pos = 2;

  RawCode out;
  out.origin = origin;
  out.bytes.reserve((trimmed.size() - pos) / 2);
  while (pos < trimmed.size()) {
    int hi = hex_digit(trimmed[pos]);
    if (hi < 0) throw DecodeError(DecodeErrorKind::NonHexCharacter, pos);
    if (pos + 1 >= trimmed.size())
      throw DecodeError(DecodeErrorKind::OddLength, trimmed.size());
    int lo = hex_digit(trimmed[pos + 1]);
    if (lo < 0) throw DecodeError(DecodeErrorKind::NonHexCharacter, pos + 1);
    out.bytes.push_back(static_cast<uint8_t>((hi << 4) | lo));
    pos += 2;
  }
  return out;
}

std::string encode_hex(const std::vector<uint8_t>& bytes) {
  static const char* hex = "0123456789abcdef";
  std::string out = "0x";
  out.reserve(2 + bytes.size() * 2);
  for (uint8_t b : bytes) {
    out.push_back(hex[b >> 4]);
    out.push_back(hex[b & 0xf]);
  }
  return out;
}

RawCode load_code_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string data = buf.str();

  bool looks_hex = !data.empty();
  for (char c : data) {
    if (hex_digit(c) >= 0 || c == 'x' || c == 'X' ||
        std::isspace(static_cast<unsigned char>(c)))
      continue;
    looks_hex = false;
    break;
  }
  if (looks_hex) return decode_hex(data, CodeOrigin::HexFile);

  RawCode out;
  out.origin = CodeOrigin::HexFile;
  out.bytes.assign(data.begin(), data.end());
  return out;
}

std::vector<Instruction> disassemble(const std::vector<uint8_t>& code) {
  std::vector<Instruction> out;
  out.reserve(code.size());
  size_t pc = 0;
  while (pc < code.size()) {
    Instruction ins;
    ins.offset = static_cast<uint32_t>(pc);
    ins.opcode = code[pc];
    const OpcodeInfo& info = opcode_info(ins.opcode);
    ins.immediate_size = info.immediate_bytes;
    if (info.immediate_bytes > 0) {
      size_t available = code.size() - pc - 1;
      size_t take = std::min<size_t>(info.immediate_bytes, available);
      Word imm = word_from_bytes(code.data() + pc + 1, take);
      if (take < info.immediate_bytes) {
        // missing trailing bytes read as zero
        imm <<= 8 * (info.immediate_bytes - take);
        ins.truncated = true;
      }
      ins.immediate = imm;
    }
    out.push_back(ins);
    pc += 1 + info.immediate_bytes;
  }
  return out;
}

std::vector<uint8_t> assemble(const std::vector<Instruction>& instructions,
                              size_t original_size) {
  std::vector<uint8_t> out;
  out.reserve(original_size);
  for (const Instruction& ins : instructions) {
    out.push_back(ins.opcode);
    if (ins.immediate_size > 0) {
      auto bytes = word_to_bytes(ins.immediate);
      for (unsigned i = 0; i < ins.immediate_size; ++i) {
        if (out.size() >= original_size) break;  // truncated tail
        out.push_back(bytes[32 - ins.immediate_size + i]);
      }
    }
  }
  return out;
}

RuntimeSplit extract_runtime(const RawCode& code) {
  RuntimeSplit split;
  auto instructions = disassemble(code.bytes);

  // Constructors never read calldata; a CALLDATALOAD before any candidate
  // copy block means we are already looking at runtime code.
  uint32_t first_calldataload = UINT32_MAX;
  for (const auto& ins : instructions) {
    if (ins.opcode == op::CALLDATALOAD || ins.opcode == op::CALLDATACOPY) {
      first_calldataload = ins.offset;
      break;
    }
  }

  LocalStack stack;
  std::optional<std::array<Word, 3>> codecopy_args;  // dest, offset, length

  for (size_t i = 0; i < instructions.size(); ++i) {
    const Instruction& ins = instructions[i];
    if (ins.offset >= first_calldataload) break;
    bool leader = ins.opcode == op::JUMPDEST ||
                  (i > 0 && (instructions[i - 1].info().klass == OpcodeClass::Halt ||
                             instructions[i - 1].info().klass == OpcodeClass::Invalid ||
                             instructions[i - 1].opcode == op::JUMP ||
                             instructions[i - 1].opcode == op::JUMPI));
    if (leader) {
      stack = LocalStack();
      codecopy_args.reset();
    }

    if (ins.opcode == op::CODECOPY) {
      auto dest = stack.peek(0), off = stack.peek(1), len = stack.peek(2);
      if (dest && off && len) codecopy_args = {{*dest, *off, *len}};
    }
    if (ins.opcode == op::RETURN && codecopy_args) {
      auto ret_off = stack.peek(0), ret_len = stack.peek(1);
      if (ret_off && ret_len) {
        const Word& copy_dest = (*codecopy_args)[0];
        const Word& copy_off = (*codecopy_args)[1];
        const Word& copy_len = (*codecopy_args)[2];
        const Word limit = Word(1) << 32;  // rejects wrap-around games
        if (*ret_off < limit && *ret_len < limit && copy_dest < limit &&
            copy_off < limit && copy_len < limit && *ret_off >= copy_dest &&
            *ret_off + *ret_len <= copy_dest + copy_len &&
            copy_off + copy_len <= code.bytes.size()) {
          if (*ret_len == 0) throw EmptyRuntimeError();
          size_t begin = static_cast<size_t>(copy_off + (*ret_off - copy_dest));
          size_t length = static_cast<size_t>(*ret_len);
          split.runtime.assign(code.bytes.begin() + begin,
                               code.bytes.begin() + begin + length);
          split.had_constructor = true;
          return split;
        }
      }
    }
    stack.apply(ins);
  }

  split.runtime = code.bytes;
  if (first_calldataload == UINT32_MAX && !code.bytes.empty()) {
    split.warnings.push_back(
        "no statically resolvable constructor return; treating input as runtime code");
  }
  return split;
}

std::string code_hash(const std::vector<uint8_t>& code) {
  return hash_hex(keccak256(code));
}

}  // namespace evmtaint
