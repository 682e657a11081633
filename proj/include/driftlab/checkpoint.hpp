#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "driftlab/core.hpp"
#include "driftlab/drift.hpp"
#include "driftlab/extractor.hpp"
#include "driftlab/prototypes.hpp"

namespace driftlab {

// Versioned text container for models, pools and projectors. Values are
// written as hexfloats so round-trips are bit-exact.

namespace detail {

inline void write_values(std::ostream& out, std::span<const double> v) {
  char buf[40];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%a", v[i]);
    out << (i ? " " : "") << buf;
  }
  out << '\n';
}

inline void read_values(std::istream& in, std::span<double> v, const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("checkpoint: missing values for " + what);
  std::istringstream ss(line);
  std::string tok;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(ss >> tok)) throw FormatError("checkpoint: too few values for " + what);
    char* end = nullptr;
    v[i] = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str()) throw FormatError("checkpoint: bad value in " + what);
  }
  if (ss >> tok) throw FormatError("checkpoint: too many values for " + what);
}

inline void write_mlp(std::ostream& out, const Mlp& net) {
  out << "layers " << net.layers.size() << '\n';
  for (const Layer& l : net.layers) {
    out << "layer " << l.in_dim() << ' ' << l.out_dim() << ' ' << (l.relu ? 1 : 0) << '\n';
    write_values(out, std::span<const double>(l.w.a));
    write_values(out, std::span<const double>(l.b));
  }
}

inline Mlp read_mlp(std::istream& in) {
  std::string tag;
  std::size_t n = 0;
  if (!(in >> tag >> n) || tag != "layers") throw FormatError("checkpoint: expected layer count");
  in.ignore();
  Mlp net;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t din = 0, dout = 0;
    int relu = 0;
    if (!(in >> tag >> din >> dout >> relu) || tag != "layer")
      throw FormatError("checkpoint: expected layer header");
    in.ignore();
    Layer l;
    l.w = Matrix(dout, din);
    l.b.assign(dout, 0.0);
    l.relu = relu != 0;
    read_values(in, std::span<double>(l.w.a), "layer weights");
    read_values(in, std::span<double>(l.b), "layer bias");
    net.layers.push_back(std::move(l));
  }
  return net;
}

}  // namespace detail

struct Checkpoint {
  FeatureExtractor extractor;
  ClassifierHead head;
  PrototypePool pool;
};

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path);
  out << "DRIFTLAB-CHECKPOINT v1\n";
  out << "extractor\n";
  detail::write_mlp(out, ck.extractor.net);
  out << "head\n";
  out << "layer " << ck.head.layer.in_dim() << ' ' << ck.head.layer.out_dim() << " 0\n";
  detail::write_values(out, std::span<const double>(ck.head.layer.w.a));
  detail::write_values(out, std::span<const double>(ck.head.layer.b));
  out << "pool " << ck.pool.by_class.size() << ' ' << ck.pool.dim << '\n';
  for (const auto& [c, e] : ck.pool.by_class) {
    out << "class " << c << ' ' << e.origin_task << ' ' << e.updated_task << '\n';
    detail::write_values(out, std::span<const double>(e.prototype));
  }
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "DRIFTLAB-CHECKPOINT v1")
    throw FormatError(path + ": bad checkpoint header");
  Checkpoint ck;
  std::string tag;
  if (!(in >> tag) || tag != "extractor") throw FormatError("checkpoint: expected extractor");
  in.ignore();
  ck.extractor.net = detail::read_mlp(in);
  if (!(in >> tag) || tag != "head") throw FormatError("checkpoint: expected head");
  in.ignore();
  std::size_t din = 0, dout = 0;
  int relu = 0;
  if (!(in >> tag >> din >> dout >> relu) || tag != "layer")
    throw FormatError("checkpoint: expected head layer");
  in.ignore();
  ck.head.layer.w = Matrix(dout, din);
  ck.head.layer.b.assign(dout, 0.0);
  ck.head.layer.relu = false;
  detail::read_values(in, std::span<double>(ck.head.layer.w.a), "head weights");
  detail::read_values(in, std::span<double>(ck.head.layer.b), "head bias");
  std::size_t n_classes = 0, dim = 0;
  if (!(in >> tag >> n_classes >> dim) || tag != "pool")
    throw FormatError("checkpoint: expected pool");
  in.ignore();
  ck.pool.dim = dim;
  for (std::size_t i = 0; i < n_classes; ++i) {
    int c = 0, origin = 0, updated = 0;
    if (!(in >> tag >> c >> origin >> updated) || tag != "class")
      throw FormatError("checkpoint: expected pool entry");
    in.ignore();
    PrototypePool::Entry e;
    e.prototype.assign(dim, 0.0);
    e.origin_task = origin;
    e.updated_task = updated;
    detail::read_values(in, std::span<double>(e.prototype), "prototype");
    ck.pool.by_class[c] = std::move(e);
  }
  return ck;
}

}  // namespace driftlab
