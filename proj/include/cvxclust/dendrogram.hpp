#pragma once

// Dendrograms from fusion-event lists, merge tables and Newick output.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "carp.hpp"
#include "dataio.hpp"
#include "errors.hpp"
#include "weight_graph.hpp"

namespace cvxclust {

enum class HeightScale { Linear, Log };

inline std::string to_string(HeightScale s) { return s == HeightScale::Linear ? "linear" : "log"; }

/// One binary merge. Children use the hclust convention: -i is leaf i (1-based),
/// +j is the cluster formed by merge row j (1-based).
struct MergeRecord {
    int left = 0;
    int right = 0;
    double height = 0.0;
    /// Level of the fusion that survives to the end of the path.
    double raw_gamma = 0.0;
    /// Level at which the two sides were first seen together (differs only after fissions).
    double first_gamma = 0.0;
};

struct Dendrogram {
    int n_leaves = 0;
    std::vector<MergeRecord> merges;
    HeightScale height_scale = HeightScale::Linear;

    /// Partition obtained by applying the first n - k merges.
    Partition cut(int k) const {
        if (k < 1 || k > n_leaves) {
            throw RangeError("cut needs 1 <= k <= " + std::to_string(n_leaves) + ", got " + std::to_string(k));
        }
        UnionFind uf(n_leaves);
        std::vector<int> rep(merges.size());
        auto leaf_of = [&](int node) { return node < 0 ? -node - 1 : rep[static_cast<std::size_t>(node - 1)]; };
        for (int m = 0; m < n_leaves - k; ++m) {
            const auto& r = merges[static_cast<std::size_t>(m)];
            const int a = leaf_of(r.left);
            uf.unite(a, leaf_of(r.right));
            rep[static_cast<std::size_t>(m)] = a;
        }
        return Partition::from_labels(uf.labels());
    }
};

namespace detail {

inline std::vector<int> meet(const std::vector<int>& a, const std::vector<int>& b) {
    std::map<std::pair<int, int>, int> ids;
    std::vector<int> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = ids.try_emplace({a[i], b[i]}, static_cast<int>(ids.size())).first->second;
    }
    return out;
}

inline double gap_cv(std::vector<double> h) {
    if (h.size() < 3) return 0.0;
    std::vector<double> gaps;
    for (std::size_t i = 1; i < h.size(); ++i) gaps.push_back(h[i] - h[i - 1]);
    const double mean = std::accumulate(gaps.begin(), gaps.end(), 0.0) / static_cast<double>(gaps.size());
    if (!(mean > 0.0)) return std::numeric_limits<double>::infinity();
    double var = 0.0;
    for (double g : gaps) var += (g - mean) * (g - mean);
    return std::sqrt(var / static_cast<double>(gaps.size())) / mean;
}

inline int node_rank(int node) { return node < 0 ? 0 : 1; }

}  // namespace detail

/// Builds the dendrogram by walking the path backwards from full fusion: the
/// partition kept at each level is the meet of the observed partition there and
/// the kept partition one level later, so a pair that splits and refuses is
/// merged at its final fusion. Merges of more than two clusters at one level are
/// split into binary merges at equal height.
inline Dendrogram build_dendrogram(const std::vector<FusionEvent>& events, int n,
                                   std::optional<HeightScale> scale = std::nullopt) {
    if (n < 1) throw DimensionError("dendrogram needs at least one leaf");
    int net = 0;
    for (const auto& e : events) {
        if (e.from < 0 || e.to < 0 || e.from >= n || e.to >= n) throw IndexError("event endpoint out of range");
        net += e.kind == EventKind::Fuse ? 1 : -1;
    }
    if (net != n - 1) {
        throw IncompleteEventsError("events contain " + std::to_string(net) + " net merges, expected " +
                                    std::to_string(n - 1));
    }
    std::vector<std::size_t> order(events.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ea = events[a];
        const auto& eb = events[b];
        if (ea.gamma != eb.gamma) return ea.gamma < eb.gamma;
        return ea.k < eb.k;
    });

    // Observed partitions after each group of equal-gamma events.
    std::vector<double> level{0.0};
    std::vector<std::vector<int>> observed{std::vector<int>(static_cast<std::size_t>(n))};
    std::iota(observed[0].begin(), observed[0].end(), 0);
    std::vector<std::vector<int>> group_fuses{{}};
    std::multimap<int, std::pair<int, int>> active;
    for (std::size_t i = 0; i < order.size();) {
        const double g = events[order[i]].gamma;
        std::vector<int> fuses;
        for (; i < order.size() && events[order[i]].gamma == g; ++i) {
            const auto& e = events[order[i]];
            if (e.kind == EventKind::Fuse) {
                active.emplace(e.edge, std::make_pair(e.from, e.to));
                fuses.push_back(static_cast<int>(order[i]));
            } else {
                auto it = active.find(e.edge);
                if (it != active.end()) active.erase(it);
            }
        }
        UnionFind uf(n);
        for (const auto& [edge, ends] : active) uf.unite(ends.first, ends.second);
        level.push_back(g);
        observed.push_back(uf.labels());
        group_fuses.push_back(std::move(fuses));
    }
    if (std::set<int>(observed.back().begin(), observed.back().end()).size() != 1) {
        throw IncompleteEventsError("events do not end in a single cluster");
    }

    std::vector<std::vector<int>> kept(observed.size());
    kept.back() = observed.back();
    for (std::size_t j = observed.size() - 1; j-- > 0;) kept[j] = detail::meet(observed[j], kept[j + 1]);

    Dendrogram d;
    d.n_leaves = n;
    std::vector<int> node(static_cast<std::size_t>(n));  // current tree node of each leaf's cluster
    for (int i = 0; i < n; ++i) node[static_cast<std::size_t>(i)] = -(i + 1);
    UnionFind clusters(n);

    auto first_seen = [&](int a, int b, std::size_t upto) {
        // Earliest level at which some member of a's cluster and some member of b's share a block.
        std::vector<int> in_a, in_b;
        for (int i = 0; i < n; ++i) {
            if (clusters.find(i) == clusters.find(a)) in_a.push_back(i);
            if (clusters.find(i) == clusters.find(b)) in_b.push_back(i);
        }
        for (std::size_t j = 1; j <= upto; ++j) {
            std::set<int> blocks;
            for (int i : in_a) blocks.insert(observed[j][static_cast<std::size_t>(i)]);
            for (int i : in_b) {
                if (blocks.count(observed[j][static_cast<std::size_t>(i)])) return level[j];
            }
        }
        return level[upto];
    };
    auto merge = [&](int a, int b, std::size_t j) {
        const int ra = clusters.find(a), rb = clusters.find(b);
        if (ra == rb) return;
        MergeRecord rec;
        rec.raw_gamma = level[j];
        rec.first_gamma = first_seen(a, b, j);
        int x = node[static_cast<std::size_t>(ra)], y = node[static_cast<std::size_t>(rb)];
        const bool swap = detail::node_rank(x) != detail::node_rank(y) ? detail::node_rank(x) > detail::node_rank(y)
                                                                       : std::abs(x) > std::abs(y);
        if (swap) std::swap(x, y);
        rec.left = x;
        rec.right = y;
        d.merges.push_back(rec);
        clusters.unite(ra, rb);
        node[static_cast<std::size_t>(clusters.find(ra))] = static_cast<int>(d.merges.size());
    };

    for (std::size_t j = 1; j < kept.size(); ++j) {
        // Clusters of kept[j - 1] that lie in one block of kept[j] are joined here.
        auto same_target = [&](int a, int b) {
            return kept[j][static_cast<std::size_t>(a)] == kept[j][static_cast<std::size_t>(b)];
        };
        std::vector<int> by_edge = group_fuses[j];
        std::sort(by_edge.begin(), by_edge.end(),
                  [&](int a, int b) { return events[static_cast<std::size_t>(a)].edge < events[static_cast<std::size_t>(b)].edge; });
        for (int idx : by_edge) {
            const auto& e = events[static_cast<std::size_t>(idx)];
            if (same_target(e.from, e.to)) merge(e.from, e.to, j);
        }
        // Links fused at earlier levels, then the smallest leaves.
        std::vector<std::pair<int, std::pair<int, int>>> links;
        for (std::size_t g = 1; g < j; ++g) {
            for (int idx : group_fuses[g]) {
                const auto& e = events[static_cast<std::size_t>(idx)];
                links.push_back({e.edge, {e.from, e.to}});
            }
        }
        std::sort(links.begin(), links.end());
        for (const auto& [edge, ends] : links) {
            if (same_target(ends.first, ends.second)) merge(ends.first, ends.second, j);
        }
        std::map<int, int> first_leaf;
        for (int i = 0; i < n; ++i) {
            auto [it, inserted] = first_leaf.try_emplace(kept[j][static_cast<std::size_t>(i)], i);
            if (!inserted) merge(it->second, i, j);
        }
    }

    std::vector<double> raw;
    for (const auto& m : d.merges) raw.push_back(m.raw_gamma);
    if (scale) {
        d.height_scale = *scale;
    } else {
        const double min_g = raw.empty() ? 1.0 : *std::min_element(raw.begin(), raw.end());
        std::vector<double> logs;
        for (double g : raw) logs.push_back(min_g > 0.0 ? std::log(g / min_g) : g);
        d.height_scale = min_g > 0.0 && detail::gap_cv(logs) < detail::gap_cv(raw) ? HeightScale::Log
                                                                                   : HeightScale::Linear;
    }
    const double min_g = raw.empty() ? 1.0 : *std::min_element(raw.begin(), raw.end());
    double running = 0.0;
    for (auto& m : d.merges) {
        const double h = d.height_scale == HeightScale::Log ? 1.0 + std::log(m.raw_gamma / min_g) : m.raw_gamma;
        running = std::max(running, h);
        m.height = running;
    }
    return d;
}

struct MergeTableRow {
    int left;
    int right;
    double height;
    double raw_gamma;
};

inline std::vector<MergeTableRow> to_merge_table(const Dendrogram& d) {
    std::vector<MergeTableRow> out;
    for (const auto& m : d.merges) out.push_back({m.left, m.right, m.height, m.raw_gamma});
    return out;
}

inline void write_merge_table(std::ostream& out, const Dendrogram& d) {
    out << "left,right,height,raw_gamma\n" << std::setprecision(17);
    for (const auto& r : to_merge_table(d)) out << r.left << ',' << r.right << ',' << r.height << ',' << r.raw_gamma << '\n';
}

namespace detail {

inline std::string newick_name(const std::string& s) {
    bool plain = !s.empty();
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == ',' || c == ':' ||
            c == ';' || c == '\'' || c == '[' || c == ']') {
            plain = false;
        }
    }
    if (plain) return s;
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("''") : std::string(1, c);
    return q + "'";
}

}  // namespace detail

/// Children in drawing order: a merged subtree is drawn before a single leaf.
inline std::pair<int, int> drawn_children(const MergeRecord& m) {
    if (m.left < 0 && m.right > 0) return {m.right, m.left};
    return {m.left, m.right};
}

/// Leaves (0-based) in the left-to-right order of the drawn tree.
inline std::vector<int> leaf_order(const Dendrogram& d) {
    if (d.merges.empty()) {
        std::vector<int> out(static_cast<std::size_t>(d.n_leaves));
        std::iota(out.begin(), out.end(), 0);
        return out;
    }
    std::vector<int> out;
    std::vector<int> stack{static_cast<int>(d.merges.size())};
    while (!stack.empty()) {
        const int node = stack.back();
        stack.pop_back();
        if (node < 0) {
            out.push_back(-node - 1);
            continue;
        }
        const auto [first, second] = drawn_children(d.merges[static_cast<std::size_t>(node - 1)]);
        stack.push_back(second);
        stack.push_back(first);
    }
    return out;
}

/// Newick string with branch lengths taken from height differences. Leaves are
/// named by labels (1-based indices when none are given).
inline std::string to_newick(const Dendrogram& d, const std::vector<std::string>& labels = {}) {
    const int n = d.n_leaves;
    auto leaf_name = [&](int i) {
        return labels.empty() ? std::to_string(i + 1) : detail::newick_name(labels[static_cast<std::size_t>(i)]);
    };
    std::ostringstream out;
    out << std::setprecision(17);
    if (n == 1) {
        out << leaf_name(0) << ';';
        return out.str();
    }
    // Iterative post-order emission keeps deep chains off the call stack.
    std::vector<std::string> text(d.merges.size());
    auto child = [&](int node, double parent_h) {
        std::ostringstream s;
        s << std::setprecision(17);
        if (node < 0) {
            s << leaf_name(-node - 1) << ':' << parent_h;
        } else {
            const auto& m = d.merges[static_cast<std::size_t>(node - 1)];
            s << text[static_cast<std::size_t>(node - 1)] << ':' << parent_h - m.height;
        }
        return s.str();
    };
    for (std::size_t m = 0; m < d.merges.size(); ++m) {
        const auto& r = d.merges[m];
        const auto [first, second] = drawn_children(r);
        text[m] = "(" + child(first, r.height) + "," + child(second, r.height) + ")";
        if (r.left > 0) text[static_cast<std::size_t>(r.left - 1)].clear();
        if (r.right > 0) text[static_cast<std::size_t>(r.right - 1)].clear();
    }
    out << text.back() << ';';
    return out.str();
}

/// Minimal Newick reader: node names, branch lengths and nesting.
struct NewickNode {
    std::string name;
    double length = 0.0;
    std::vector<int> children;
};

struct NewickTree {
    std::vector<NewickNode> nodes;
    int root = -1;

    /// Leaf-name sets of every internal node, sorted; two trees with equal clade
    /// lists have the same topology.
    std::vector<std::vector<std::string>> clades() const {
        std::vector<std::vector<std::string>> out;
        std::vector<std::vector<std::string>> leaves(nodes.size());
        std::vector<int> post;
        std::vector<std::pair<int, bool>> stack{{root, false}};
        while (!stack.empty()) {
            auto [v, done] = stack.back();
            stack.pop_back();
            if (done) {
                post.push_back(v);
                continue;
            }
            stack.push_back({v, true});
            for (int c : nodes[static_cast<std::size_t>(v)].children) stack.push_back({c, false});
        }
        for (int v : post) {
            auto& mine = leaves[static_cast<std::size_t>(v)];
            const auto& node = nodes[static_cast<std::size_t>(v)];
            if (node.children.empty()) {
                mine.push_back(node.name);
                continue;
            }
            for (int c : node.children) {
                const auto& sub = leaves[static_cast<std::size_t>(c)];
                mine.insert(mine.end(), sub.begin(), sub.end());
            }
            std::sort(mine.begin(), mine.end());
            out.push_back(mine);
        }
        std::sort(out.begin(), out.end());
        return out;
    }
};

inline NewickTree parse_newick(const std::string& s) {
    NewickTree tree;
    std::size_t pos = 0;
    auto skip_ws = [&] {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    };
    auto fail = [&](const std::string& what) {
        throw ParseError("newick: " + what + " at offset " + std::to_string(pos));
    };
    auto read_name = [&] {
        skip_ws();
        std::string name;
        if (pos < s.size() && s[pos] == '\'') {
            ++pos;
            while (true) {
                if (pos >= s.size()) fail("unterminated quote");
                if (s[pos] == '\'') {
                    if (pos + 1 < s.size() && s[pos + 1] == '\'') {
                        name += '\'';
                        pos += 2;
                        continue;
                    }
                    ++pos;
                    break;
                }
                name += s[pos++];
            }
        } else {
            while (pos < s.size() && std::string_view("(),:;").find(s[pos]) == std::string_view::npos &&
                   !std::isspace(static_cast<unsigned char>(s[pos]))) {
                name += s[pos++];
            }
        }
        return name;
    };
    auto read_length = [&](NewickNode& node) {
        skip_ws();
        if (pos < s.size() && s[pos] == ':') {
            ++pos;
            skip_ws();
            std::size_t end = pos;
            while (end < s.size() && std::string_view("(),:;").find(s[end]) == std::string_view::npos) ++end;
            node.length = detail::parse_double(std::string_view(s).substr(pos, end - pos), 1);
            pos = end;
        }
    };
    std::vector<int> open;
    auto new_node = [&] {
        tree.nodes.emplace_back();
        const int id = static_cast<int>(tree.nodes.size()) - 1;
        if (!open.empty()) tree.nodes[static_cast<std::size_t>(open.back())].children.push_back(id);
        return id;
    };
    skip_ws();
    if (pos >= s.size()) fail("empty input");
    int last = -1;
    while (true) {
        skip_ws();
        if (pos >= s.size()) fail("missing ';'");
        const char c = s[pos];
        if (c == '(') {
            ++pos;
            const int id = new_node();
            open.push_back(id);
            continue;
        }
        if (c == ',' ) {
            ++pos;
            if (open.empty()) fail("',' outside parentheses");
            continue;
        }
        if (c == ')') {
            ++pos;
            if (open.empty()) fail("unbalanced ')'");
            last = open.back();
            open.pop_back();
            auto& node = tree.nodes[static_cast<std::size_t>(last)];
            node.name = read_name();
            read_length(node);
            continue;
        }
        if (c == ';') {
            ++pos;
            break;
        }
        last = new_node();
        auto& node = tree.nodes[static_cast<std::size_t>(last)];
        node.name = read_name();
        if (node.name.empty()) fail("expected a name");
        read_length(node);
    }
    if (!open.empty()) fail("unbalanced '('");
    tree.root = tree.nodes.empty() ? -1 : 0;
    return tree;
}

}  // namespace cvxclust
