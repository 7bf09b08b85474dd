#pragma once

// Text cascade format, version 1:
//
//   HAARCASCADE v1 <base_w> <base_h> <variance_normalize:0|1> <n_stages>
//   STAGE <n_stumps> <threshold>
//   STUMP <vote_weight> <threshold> <polarity> <n_rects>
//   RECT <x> <y> <w> <h> <weight>
//
// STUMP lines follow their STAGE, RECT lines follow their STUMP. Rects are in
// base-window coordinates.

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "drowsy/error.hpp"
#include "drowsy/haar.hpp"
#include "drowsy/textio.hpp"

namespace drowsy::haar {

inline void write_cascade(std::ostream& out, const Cascade& c) {
  using textio::format_double;
  out << "HAARCASCADE v1 " << c.base_width << ' ' << c.base_height << ' ' << (c.variance_normalize ? 1 : 0) << ' '
      << c.stages.size() << '\n';
  for (const auto& st : c.stages) {
    out << "STAGE " << st.stumps.size() << ' ' << format_double(st.threshold) << '\n';
    for (const auto& s : st.stumps) {
      out << "STUMP " << format_double(s.vote) << ' ' << format_double(s.threshold) << ' ' << s.polarity << ' '
          << s.feature.rects.size() << '\n';
      for (const auto& r : s.feature.rects)
        out << "RECT " << r.rect.x << ' ' << r.rect.y << ' ' << r.rect.w << ' ' << r.rect.h << ' '
            << format_double(r.weight) << '\n';
    }
  }
}

inline Cascade read_cascade(std::istream& in, const std::string& source = "cascade") {
  textio::LineReader rd(in, source);
  auto head = rd.tokens();
  if (head.size() != 6 || head[0] != "HAARCASCADE") rd.fail("expected 'HAARCASCADE v1 <w> <h> <vn> <stages>' header");
  if (head[1] != "v1") rd.fail("unsupported cascade version '" + head[1] + "'");
  Cascade c;
  c.base_width = static_cast<int>(rd.integer(head[2]));
  c.base_height = static_cast<int>(rd.integer(head[3]));
  const auto vn = rd.integer(head[4]);
  if (vn != 0 && vn != 1) rd.fail("variance_normalize must be 0 or 1");
  c.variance_normalize = vn == 1;
  const auto n_stages = rd.integer(head[5]);
  if (n_stages < 1) rd.fail("cascade needs at least one stage");
  for (long long s = 0; s < n_stages; ++s) {
    auto st_tok = rd.expect("STAGE", 2);
    Stage st;
    const auto n_stumps = rd.integer(st_tok[1]);
    if (n_stumps < 1) rd.fail("stage needs at least one stump");
    st.threshold = rd.num(st_tok[2]);
    for (long long k = 0; k < n_stumps; ++k) {
      auto sp = rd.expect("STUMP", 4);
      Stump stump;
      stump.vote = rd.num(sp[1]);
      stump.threshold = rd.num(sp[2]);
      stump.polarity = static_cast<int>(rd.integer(sp[3]));
      const auto n_rects = rd.integer(sp[4]);
      if (n_rects < 1 || n_rects > 4) rd.fail("stump needs 1 to 4 rects");
      for (long long r = 0; r < n_rects; ++r) {
        auto rt = rd.expect("RECT", 5);
        WeightedRect wr;
        wr.rect = {static_cast<int>(rd.integer(rt[1])), static_cast<int>(rd.integer(rt[2])),
                   static_cast<int>(rd.integer(rt[3])), static_cast<int>(rd.integer(rt[4]))};
        wr.weight = rd.num(rt[5]);
        stump.feature.rects.push_back(wr);
      }
      stump.feature.kind = infer_kind(stump.feature.rects);
      st.stumps.push_back(std::move(stump));
    }
    c.stages.push_back(std::move(st));
  }
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    rd.fail(e.what());
  }
  return c;
}

inline void save_cascade(const std::filesystem::path& path, const Cascade& c) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  write_cascade(out, c);
  if (!out) throw FormatError("write failed for " + path.string());
}

inline Cascade load_cascade(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_cascade(in, path.string());
}

}  // namespace drowsy::haar
