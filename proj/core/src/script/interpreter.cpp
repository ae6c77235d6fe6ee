#include <chrono>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "script/ast.hpp"
#include "script/ops.hpp"
#include "tabula/csv.hpp"
#include "tabula/script.hpp"

namespace tabula::script {

BoundsRect ResultSheet::bounds() const {
    BoundsRect b;
    for (const auto& [addr, cell] : cells) {
        if (!cell.value.is_empty()) include(b, addr);
    }
    return b;
}

Value ResultSheet::value_at(const CellAddress& a) const {
    auto it = cells.find(a);
    return it == cells.end() ? Value::empty() : it->second.value;
}

std::optional<FormatSpec> ResultSheet::format_at(const CellAddress& a) const {
    auto it = cells.find(a);
    if (it != cells.end() && it->second.format) return it->second.format;
    if (auto r = row_formats.find(a.row); r != row_formats.end()) return r->second;
    if (auto c = column_formats.find(a.column); c != column_formats.end()) return c->second;
    return std::nullopt;
}

const ResultSheet* ResultsGrid::find(std::string_view name) const {
    for (const auto& s : sheets) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

ResultSheet* ResultsGrid::find(std::string_view name) {
    for (auto& s : sheets) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

Value ResultsGrid::value_at(std::string_view sheet, const CellAddress& a) const {
    const ResultSheet* s = find(sheet);
    return s ? s->value_at(a) : Value::empty();
}

namespace {

constexpr std::size_t kMaxCallDepth = 200;
constexpr std::size_t kMaxRangeCells = 1'000'000;
constexpr std::int64_t kMaxRangeLength = 10'000'000;

struct UserFunction {
    std::string name;
    std::vector<std::string> params;
    Block body;
    SectionKind section;
};

struct BuiltinFunction {
    std::string name;
};
struct WorkbookHandle {};
struct SheetHandle {
    std::string sheet;
};
struct CellHandle {
    std::string sheet;
    CellAddress addr;
};

struct Mapping;
using Receiver = std::variant<WorkbookHandle, SheetHandle, CellHandle, std::shared_ptr<Mapping>>;

struct BoundMethod {
    Receiver self;
    std::string name;
};

using Object = std::variant<Value, std::shared_ptr<const UserFunction>, BuiltinFunction, WorkbookHandle, SheetHandle,
                            CellHandle, BoundMethod, std::shared_ptr<Mapping>>;

bool key_equal(const Value& a, const Value& b) {
    if (a.is_numeric() && b.is_numeric()) return a.as_double() == b.as_double();
    return a == b;
}

struct Mapping {
    std::vector<std::pair<Value, Object>> entries;

    Object* find(const Value& key) {
        for (auto& [k, v] : entries) {
            if (key_equal(k, key)) return &v;
        }
        return nullptr;
    }
};

using Scope = std::map<std::string, Object, std::less<>>;

const std::set<std::string, std::less<>> kBuiltinNames{
    "SUM", "AVERAGE", "MIN", "MAX", "COUNT", "COUNTIF", "IF",  "ABS",   "ROUND", "LEN",
    "CONCAT", "Error", "Date", "print", "len", "str",   "range", "Workbook"};

/// Fault that has already been stamped with the stack at the point it was raised.
struct Raised {
    std::string category;
    ErrorKind kind;
    std::string message;
    std::vector<StackFrame> stack;
};

struct BudgetExceeded {
    std::string message;
    std::vector<StackFrame> stack;
};

enum class Flow { Normal, Break, Continue, Return };

std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

std::string describe(const Object& o);

std::string repr(const Object& o) {
    if (const Value* v = std::get_if<Value>(&o); v && v->is_text()) return quoted(v->as_text());
    return describe(o);
}

std::string describe(const Object& o) {
    struct Visitor {
        std::string operator()(const Value& v) const { return display(v); }
        std::string operator()(const std::shared_ptr<const UserFunction>& f) const {
            return "<function " + f->name + ">";
        }
        std::string operator()(const BuiltinFunction& b) const { return "<builtin " + b.name + ">"; }
        std::string operator()(const WorkbookHandle&) const { return "<workbook>"; }
        std::string operator()(const SheetHandle& s) const { return "<sheet " + s.sheet + ">"; }
        std::string operator()(const CellHandle& c) const { return "<cell " + c.sheet + "!" + c.addr.a1() + ">"; }
        std::string operator()(const BoundMethod& m) const { return "<method " + m.name + ">"; }
        std::string operator()(const std::shared_ptr<Mapping>& m) const {
            std::string out = "{";
            for (std::size_t i = 0; i < m->entries.size(); ++i) {
                if (i) out += ", ";
                out += repr(Object(m->entries[i].first)) + ": " + repr(m->entries[i].second);
            }
            return out + "}";
        }
    };
    return std::visit(Visitor{}, o);
}

std::string kind_of(const Object& o) {
    struct Visitor {
        std::string operator()(const Value& v) const { return std::string(v.type_name()); }
        std::string operator()(const std::shared_ptr<const UserFunction>&) const { return "function"; }
        std::string operator()(const BuiltinFunction&) const { return "builtin"; }
        std::string operator()(const WorkbookHandle&) const { return "workbook"; }
        std::string operator()(const SheetHandle&) const { return "sheet"; }
        std::string operator()(const CellHandle&) const { return "cell"; }
        std::string operator()(const BoundMethod&) const { return "method"; }
        std::string operator()(const std::shared_ptr<Mapping>&) const { return "dict"; }
    };
    return std::visit(Visitor{}, o);
}

std::vector<std::string> code_points(const std::string& s) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < s.size();) {
        std::size_t len = 1;
        const auto c = static_cast<unsigned char>(s[i]);
        if (c >= 0xF0) {
            len = 4;
        } else if (c >= 0xE0) {
            len = 3;
        } else if (c >= 0xC0) {
            len = 2;
        }
        out.push_back(s.substr(i, len));
        i += len;
    }
    return out;
}

class Interpreter {
public:
    explicit Interpreter(const ExecOptions& options) : options_(options) {}

    ExecutionResult run(const std::vector<SectionSource>& sections) {
        start_ = std::chrono::steady_clock::now();
        try {
            for (const auto& s : sections) run_section(s);
        } catch (const BudgetExceeded& b) {
            result_.errors.push_back({"BudgetExceeded", b.message, b.stack, std::nullopt});
            result_.incomplete = true;
        }
        return std::move(result_);
    }

private:
    struct Frame {
        std::string function;
        SectionKind section;
        std::size_t line = 0;
        Scope* locals = nullptr;
        std::set<std::string, std::less<>>* globals = nullptr;
    };

    // ---- sections and statements --------------------------------------------------------

    void run_section(const SectionSource& src) {
        section_ = src.kind;
        std::vector<Stmt> program;
        try {
            program = parse_program(src.text);
        } catch (const ScriptSyntaxError& e) {
            result_.errors.push_back(
                {"SyntaxError", e.detail(), {StackFrame{src.kind, e.line(), "<module>"}}, std::nullopt});
            return;
        }
        frames_.assign(1, Frame{"<module>", src.kind});
        const bool tolerant = !is_editable(src.kind);
        for (const auto& stmt : program) {
            try {
                const Flow flow = exec(stmt);
                if (flow != Flow::Normal) {
                    result_.errors.push_back({"SyntaxError", "'return', 'break' or 'continue' outside its block",
                                              snapshot(), std::nullopt});
                    if (!tolerant) break;
                }
            } catch (const Raised& r) {
                result_.errors.push_back({r.category, r.message, r.stack, std::nullopt});
                frames_.resize(1);
                if (!tolerant) break;
            }
        }
        frames_.clear();
    }

    std::vector<StackFrame> snapshot() const {
        std::vector<StackFrame> out;
        out.reserve(frames_.size());
        for (const auto& f : frames_) out.push_back({f.section, f.line, f.function});
        return out;
    }

    void charge(std::uint64_t n) {
        const std::uint64_t before = steps_;
        steps_ += n;
        if (steps_ > options_.step_budget) {
            throw BudgetExceeded{"step budget of " + std::to_string(options_.step_budget) + " exhausted", snapshot()};
        }
        if ((before >> 12) != (steps_ >> 12) &&
            std::chrono::steady_clock::now() - start_ > options_.clock_budget) {
            throw BudgetExceeded{"clock budget of " + std::to_string(options_.clock_budget.count()) +
                                 " ms exhausted",
                                 snapshot()};
        }
    }

    Flow exec(const Stmt& stmt) {
        frames_.back().line = stmt.line;
        charge(1);
        try {
            return std::visit([&](const auto& node) { return exec_node(node, stmt); }, stmt.node);
        } catch (const Fault& f) {
            throw Raised{f.category(), f.kind(), f.what(), snapshot()};
        } catch (const Error& e) {
            throw Raised{e.kind(), ErrorKind::Value, e.what(), snapshot()};
        }
    }

    Flow exec_block(const std::vector<Stmt>& block) {
        for (const auto& s : block) {
            if (Flow f = exec(s); f != Flow::Normal) return f;
        }
        return Flow::Normal;
    }

    Flow exec_node(const ExprStmt& s, const Stmt&) {
        eval(s.expr);
        return Flow::Normal;
    }

    static bool is_cell_value_target(const Expr& target) {
        const auto* attr = std::get_if<AttributeExpr>(&target.node);
        return attr && (attr->name == "value" || attr->name == "Value");
    }

    Flow exec_node(const AssignStmt& s, const Stmt&) {
        if (section_ == SectionKind::Formulae && frames_.size() == 1 && is_cell_value_target(s.target)) {
            const auto& attr = std::get<AttributeExpr>(s.target.node);
            const Object holder = eval(*attr.object);
            const auto* cell = std::get_if<CellHandle>(&holder);
            if (!cell) type_fault("cannot assign .value on a " + kind_of(holder));
            auto capture = [&](const std::string& category, ErrorKind kind, const std::string& message,
                               std::vector<StackFrame> stack) {
                store(*cell, Value::error(kind, message));
                result_.errors.push_back({category, message, std::move(stack), SheetCell{cell->sheet, cell->addr}});
            };
            try {
                Value v = s.augmented ? binary_op(*s.augmented, cell_value(*cell), eval_value(s.value))
                                      : as_value(eval(s.value), "assigned to a cell");
                store(*cell, std::move(v));
            } catch (const Fault& f) {
                capture(f.category(), f.kind(), f.what(), snapshot());
            } catch (const Raised& r) {
                capture(r.category, r.kind, r.message, r.stack);
            } catch (const Error& e) {
                capture(e.kind(), ErrorKind::Value, e.what(), snapshot());
            }
            return Flow::Normal;
        }
        if (s.augmented) {
            Value current = eval_value(s.target);
            assign(s.target, binary_op(*s.augmented, current, eval_value(s.value)));
        } else {
            assign(s.target, eval(s.value));
        }
        return Flow::Normal;
    }

    Flow exec_node(const FuncDefStmt& s, const Stmt&) {
        bind(s.name, std::make_shared<const UserFunction>(UserFunction{s.name, s.params, s.body, frames_.back().section}));
        return Flow::Normal;
    }

    Flow exec_node(const IfStmt& s, const Stmt&) {
        for (const auto& [cond, body] : s.branches) {
            if (truthy_object(eval(cond))) return exec_block(*body);
        }
        if (s.else_body) return exec_block(*s.else_body);
        return Flow::Normal;
    }

    Flow exec_node(const ForStmt& s, const Stmt&) {
        const Object iterable = eval(s.iterable);
        std::vector<Object> items;
        if (const Value* v = std::get_if<Value>(&iterable); v && v->is_list()) {
            for (const auto& item : v->as_list().items) items.emplace_back(item);
        } else if (v && v->is_text()) {
            for (auto& cp : code_points(v->as_text())) items.emplace_back(Value::text(std::move(cp)));
        } else if (const auto* m = std::get_if<std::shared_ptr<Mapping>>(&iterable)) {
            for (const auto& [k, val] : (*m)->entries) items.emplace_back(k);
        } else {
            type_fault("cannot iterate over a " + kind_of(iterable));
        }
        const std::size_t line = frames_.back().line;
        for (auto& item : items) {
            frames_.back().line = line;
            charge(1);
            bind(s.var, std::move(item));
            const Flow f = exec_block(*s.body);
            if (f == Flow::Break) break;
            if (f == Flow::Return) return f;
        }
        return Flow::Normal;
    }

    Flow exec_node(const WhileStmt& s, const Stmt&) {
        const std::size_t line = frames_.back().line;
        while (true) {
            frames_.back().line = line;
            charge(1);
            if (!truthy_object(eval(s.cond))) break;
            const Flow f = exec_block(*s.body);
            if (f == Flow::Break) break;
            if (f == Flow::Return) return f;
        }
        return Flow::Normal;
    }

    Flow exec_node(const ReturnStmt& s, const Stmt&) {
        return_value_ = s.value ? eval(*s.value) : Object(Value::empty());
        return Flow::Return;
    }

    Flow exec_node(const PassStmt&, const Stmt&) { return Flow::Normal; }
    Flow exec_node(const BreakStmt&, const Stmt&) { return Flow::Break; }
    Flow exec_node(const ContinueStmt&, const Stmt&) { return Flow::Continue; }

    Flow exec_node(const GlobalStmt& s, const Stmt&) {
        if (auto* g = frames_.back().globals) g->insert(s.names.begin(), s.names.end());
        return Flow::Normal;
    }

    // ---- names ---------------------------------------------------------------------------

    Scope& scope_for(std::string_view name) {
        Frame& f = frames_.back();
        if (f.locals && !(f.globals && f.globals->count(name))) return *f.locals;
        return globals_;
    }

    void bind(const std::string& name, Object value) { scope_for(name)[name] = std::move(value); }

    const Object* lookup(std::string_view name) const {
        const Frame& f = frames_.back();
        if (f.locals) {
            if (auto it = f.locals->find(name); it != f.locals->end()) return &it->second;
        }
        if (auto it = globals_.find(name); it != globals_.end()) return &it->second;
        return nullptr;
    }

    Object lookup_or_builtin(const std::string& name) {
        if (const Object* o = lookup(name)) {
            if (const Value* v = std::get_if<Value>(o); v && v->is_list()) charge(v->as_list().items.size() / 8);
            return *o;
        }
        if (kBuiltinNames.count(name)) return BuiltinFunction{name};
        throw Fault("NameError", ErrorKind::Name, "name '" + name + "' is not defined");
    }

    // ---- expressions ---------------------------------------------------------------------

    Value as_value(Object o, const std::string& context) {
        if (auto* v = std::get_if<Value>(&o)) return std::move(*v);
        if (std::holds_alternative<CellHandle>(o)) {
            type_fault("a cell object cannot be " + context + "; read its .value");
        }
        type_fault("a " + kind_of(o) + " cannot be " + context);
    }

    Value eval_value(const Expr& e) { return as_value(eval(e), "used as a value"); }

    bool truthy_object(const Object& o) {
        if (const Value* v = std::get_if<Value>(&o)) return truthy(*v);
        if (const auto* m = std::get_if<std::shared_ptr<Mapping>>(&o)) return !(*m)->entries.empty();
        return true;
    }

    Object eval(const Expr& e) {
        return std::visit([&](const auto& node) { return eval_node(node); }, e.node);
    }

    Object eval_node(const LiteralExpr& e) { return e.value; }
    Object eval_node(const NameExpr& e) { return lookup_or_builtin(e.name); }

    Object eval_node(const ListExpr& e) {
        std::vector<Value> items;
        items.reserve(e.items.size());
        for (const auto& item : e.items) items.push_back(as_value(eval(item), "stored in a list"));
        return Value::list(std::move(items));
    }

    Object eval_node(const DictExpr& e) {
        auto m = std::make_shared<Mapping>();
        for (const auto& [k, v] : e.entries) {
            Value key = eval_value(k);
            Object value = eval(v);
            if (Object* slot = m->find(key)) {
                *slot = std::move(value);
            } else {
                m->entries.emplace_back(std::move(key), std::move(value));
            }
        }
        return m;
    }

    Object eval_node(const AttributeExpr& e) { return get_attr(eval(*e.object), e.name); }

    Object eval_node(const SubscriptExpr& e) {
        if (const auto* name = std::get_if<NameExpr>(&e.object->node)) {
            if (const Object* o = lookup(name->name)) {
                const Value index = eval_value(*e.index);
                return subscript(*o, index);
            }
        }
        const Object object = eval(*e.object);
        return subscript(object, eval_value(*e.index));
    }

    Object eval_node(const BinaryExpr& e) {
        Value lhs = eval_value(*e.lhs);
        Value rhs = eval_value(*e.rhs);
        return binary_op(e.op, lhs, rhs);
    }

    Object eval_node(const CompareExpr& e) {
        Value lhs = eval_value(*e.lhs);
        Value rhs = eval_value(*e.rhs);
        return compare_op(e.op, lhs, rhs);
    }

    Object eval_node(const UnaryExpr& e) {
        if (e.op == UnaryKind::Not) return Value::boolean(!truthy_object(eval(*e.operand)));
        Value v = eval_value(*e.operand);
        return e.op == UnaryKind::Neg ? negate(v) : unary_plus(v);
    }

    Object eval_node(const LogicExpr& e) {
        Object lhs = eval(*e.lhs);
        const bool t = truthy_object(lhs);
        if (e.op == LogicKind::And ? !t : t) return lhs;
        return eval(*e.rhs);
    }

    Object eval_node(const CallExpr& e) {
        // xs.append(v) on a plain variable mutates the variable's list in place.
        if (const auto* attr = std::get_if<AttributeExpr>(&e.callee->node); attr && attr->name == "append") {
            if (const auto* name = std::get_if<NameExpr>(&attr->object->node)) {
                if (const Object* o = lookup(name->name)) {
                    if (const Value* v = std::get_if<Value>(o); v && v->is_list()) {
                        if (e.args.size() != 1 || !e.kwargs.empty()) arity_fault("append", "1", e.args.size());
                        Value item = as_value(eval(e.args[0]), "stored in a list");
                        auto& target = *std::get_if<Value>(&scope_for(name->name)[name->name]);
                        std::vector<Value> items = target.is_list() ? target.as_list().items : std::vector<Value>{};
                        items.push_back(std::move(item));
                        target = Value::list(std::move(items));
                        return Value::empty();
                    }
                }
            }
        }
        const Object callee = eval(*e.callee);
        std::vector<Object> args;
        args.reserve(e.args.size());
        for (const auto& a : e.args) args.push_back(eval(a));
        std::vector<std::pair<std::string, Object>> kwargs;
        for (const auto& k : e.kwargs) kwargs.emplace_back(k.name, eval(*k.value));
        return call(callee, std::move(args), std::move(kwargs));
    }

    // ---- calls ---------------------------------------------------------------------------

    using Kwargs = std::vector<std::pair<std::string, Object>>;

    Object call(const Object& callee, std::vector<Object> args, Kwargs kwargs) {
        charge(1);
        if (const auto* f = std::get_if<std::shared_ptr<const UserFunction>>(&callee)) {
            if (!kwargs.empty()) type_fault((*f)->name + "() does not take keyword arguments");
            return call_user(**f, std::move(args));
        }
        if (const auto* b = std::get_if<BuiltinFunction>(&callee)) return call_builtin(b->name, args, kwargs);
        if (const auto* m = std::get_if<BoundMethod>(&callee)) return call_method(*m, args, kwargs);
        type_fault("a " + kind_of(callee) + " is not callable");
    }

    Object call_user(const UserFunction& fn, std::vector<Object> args) {
        if (frames_.size() >= kMaxCallDepth) {
            throw Fault("RecursionError", ErrorKind::Value, "maximum call depth of " +
                                                                std::to_string(kMaxCallDepth) + " exceeded");
        }
        if (args.size() != fn.params.size()) {
            arity_fault(fn.name, std::to_string(fn.params.size()), args.size());
        }
        Scope locals;
        std::set<std::string, std::less<>> global_names;
        for (std::size_t i = 0; i < args.size(); ++i) locals[fn.params[i]] = std::move(args[i]);
        frames_.push_back(Frame{fn.name, fn.section, 0, &locals, &global_names});
        struct Pop {
            std::vector<Frame>& frames;
            ~Pop() { frames.pop_back(); }
        } pop{frames_};
        if (exec_block(*fn.body) == Flow::Return) return std::exchange(return_value_, Value::empty());
        return Value::empty();
    }

    std::vector<Value> values_of(const std::vector<Object>& args, const std::string& fn) {
        std::vector<Value> out;
        out.reserve(args.size());
        std::uint64_t work = 0;
        for (const auto& a : args) {
            out.push_back(as_value(a, "passed to " + fn + "()"));
            if (out.back().is_list()) work += out.back().as_list().items.size();
        }
        charge(work / 8);
        return out;
    }

    static void no_kwargs(const Kwargs& kwargs, const std::string& fn) {
        if (!kwargs.empty()) type_fault(fn + "() got an unexpected keyword argument '" + kwargs.front().first + "'");
    }

    const std::string& text_arg(const Object& o, const std::string& what) {
        const Value* v = std::get_if<Value>(&o);
        if (!v || !v->is_text()) type_fault(what + " must be Text, got " + kind_of(o));
        return v->as_text();
    }

    Object call_builtin(const std::string& name, const std::vector<Object>& args, const Kwargs& kwargs) {
        if (name == "print") {
            no_kwargs(kwargs, name);
            std::string line;
            for (std::size_t i = 0; i < args.size(); ++i) {
                if (i) line += ' ';
                line += describe(args[i]);
            }
            result_.output += line + "\n";
            return Value::empty();
        }
        if (name == "Workbook") {
            no_kwargs(kwargs, name);
            if (!args.empty()) arity_fault(name, "0", args.size());
            return WorkbookHandle{};
        }
        if (name == "str") {
            no_kwargs(kwargs, name);
            if (args.size() != 1) arity_fault(name, "1", args.size());
            return Value::text(describe(args[0]));
        }
        if (name == "len") {
            no_kwargs(kwargs, name);
            if (args.size() != 1) arity_fault(name, "1", args.size());
            if (const auto* m = std::get_if<std::shared_ptr<Mapping>>(&args[0])) {
                return Value::integer(static_cast<std::int64_t>((*m)->entries.size()));
            }
            const Value* v = std::get_if<Value>(&args[0]);
            if (v && v->is_list()) return Value::integer(static_cast<std::int64_t>(v->as_list().items.size()));
            if (v && v->is_text()) return Value::integer(static_cast<std::int64_t>(code_points(v->as_text()).size()));
            type_fault("len() of a " + kind_of(args[0]));
        }
        std::vector<Value> values = values_of(args, name);
        no_kwargs(kwargs, name);
        if (name == "SUM") return fn_sum(values);
        if (name == "AVERAGE") return fn_average(values);
        if (name == "MIN") return fn_min(values);
        if (name == "MAX") return fn_max(values);
        if (name == "COUNT") return fn_count(values);
        if (name == "COUNTIF") return fn_countif(values);
        if (name == "IF") return fn_if(values);
        if (name == "ABS") return fn_abs(values);
        if (name == "ROUND") return fn_round(values);
        if (name == "LEN") return fn_len(values);
        if (name == "CONCAT") return fn_concat(values);
        if (name == "Error") {
            if (values.empty() || values.size() > 2) arity_fault(name, "1 or 2", values.size());
            if (!values[0].is_text()) type_fault("Error() kind must be Text");
            auto kind = parse_error_kind(values[0].as_text());
            if (!kind) throw Fault("ValueError", ErrorKind::Value, "unknown error kind '" + values[0].as_text() + "'");
            std::string message;
            if (values.size() == 2) message = display(values[1]);
            return Value::error(*kind, std::move(message));
        }
        if (name == "Date") {
            if (values.size() != 1) arity_fault(name, "1", values.size());
            if (!values[0].is_text()) type_fault("Date() needs an ISO date text");
            auto d = Date::parse_iso(values[0].as_text());
            if (!d) throw Fault("ValueError", ErrorKind::Value, "invalid ISO date '" + values[0].as_text() + "'");
            return Value::date(*d);
        }
        if (name == "range") return make_range(values);
        throw Fault("NameError", ErrorKind::Name, "name '" + name + "' is not defined");
    }

    Object make_range(const std::vector<Value>& values) {
        if (values.empty() || values.size() > 3) arity_fault("range", "1 to 3", values.size());
        for (const auto& v : values) {
            if (!v.is_integer()) type_fault("range() arguments must be Integer, got " + std::string(v.type_name()));
        }
        std::int64_t start = 0, stop = 0, step = 1;
        if (values.size() == 1) {
            stop = values[0].as_integer();
        } else {
            start = values[0].as_integer();
            stop = values[1].as_integer();
            if (values.size() == 3) step = values[2].as_integer();
        }
        if (step == 0) throw Fault("ValueError", ErrorKind::Value, "range() step must not be zero");
        const long double span = static_cast<long double>(stop) - static_cast<long double>(start);
        long double count_ld = span / static_cast<long double>(step);
        if (count_ld < 0) count_ld = 0;
        if (count_ld > kMaxRangeLength) {
            throw Fault("ValueError", ErrorKind::Value,
                        "range() longer than " + std::to_string(kMaxRangeLength) + " items");
        }
        std::vector<Value> items;
        for (std::int64_t i = start; step > 0 ? i < stop : i > stop; i += step) {
            items.push_back(Value::integer(i));
            if (items.size() % 4096 == 0) charge(4096);
            if ((step > 0 && i > INT64_MAX - step) || (step < 0 && i < INT64_MIN - step)) break;
        }
        return Value::list(std::move(items));
    }

    // ---- the workbook object ---------------------------------------------------------------

    ResultSheet& sheet_of(const std::string& name) {
        ResultSheet* s = result_.grid.find(name);
        if (!s) throw Fault("NameError", ErrorKind::Name, "unknown sheet '" + name + "'");
        return *s;
    }

    Value cell_value(const CellHandle& h) { return sheet_of(h.sheet).value_at(h.addr); }

    void store(const CellHandle& h, Value v) {
        ResultSheet& sheet = sheet_of(h.sheet);
        ResultCell& cell = sheet.cells[h.addr];
        if (cell.enforced_type && !v.is_empty() && !v.is_error()) {
            try {
                v = coerce_to_type(v, *cell.enforced_type);
            } catch (const TypeConformanceError& e) {
                v = Value::error(ErrorKind::Type, e.what());
            }
        }
        if (section_ == SectionKind::Constants) {
            cell.from_constant = true;
        } else if (section_ == SectionKind::PostFormulae && cell.from_constant && !cell.overridden) {
            cell.overridden = true;
            cell.original = cell.value;
        }
        cell.value = std::move(v);
        prune(sheet, h.addr);
    }

    static void prune(ResultSheet& sheet, const CellAddress& a) {
        auto it = sheet.cells.find(a);
        if (it == sheet.cells.end()) return;
        const ResultCell& c = it->second;
        if (c.value.is_empty() && !c.from_constant && !c.overridden && !c.enforced_type && !c.format) {
            sheet.cells.erase(it);
        }
    }

    static CellAddress address_arg(const Object& o) {
        const Value* v = std::get_if<Value>(&o);
        if (!v || !v->is_text()) type_fault("cell address must be Text, got " + kind_of(o));
        auto a = CellAddress::parse(v->as_text());
        if (!a) throw Fault("ValueError", ErrorKind::Ref, "invalid cell address '" + v->as_text() + "'");
        return *a;
    }

    Object get_attr(const Object& o, const std::string& name) {
        if (std::holds_alternative<WorkbookHandle>(o)) {
            if (name == "locked") return Value::boolean(locked_);
            if (name == "add_sheet" || name == "union_cells" || name == "sheet_names") {
                return BoundMethod{WorkbookHandle{}, name};
            }
        } else if (const auto* s = std::get_if<SheetHandle>(&o)) {
            if (name == "name") return Value::text(s->sheet);
            if (name == "range" || name == "column" || name == "load_csv" || name == "addresses" ||
                name == "column_format" || name == "row_format") {
                return BoundMethod{*s, name};
            }
            if (auto a = CellAddress::parse(name); a && name.find('$') == std::string::npos) {
                sheet_of(s->sheet);
                return CellHandle{s->sheet, *a};
            }
        } else if (const auto* c = std::get_if<CellHandle>(&o)) {
            ResultSheet& sheet = sheet_of(c->sheet);
            auto it = sheet.cells.find(c->addr);
            const ResultCell* cell = it == sheet.cells.end() ? nullptr : &it->second;
            if (name == "value" || name == "Value") return cell ? cell->value : Value::empty();
            if (name == "format") {
                return cell && cell->format ? Value::text(cell->format->canonical()) : Value::empty();
            }
            if (name == "enforced_type") {
                return cell && cell->enforced_type ? Value::text(std::string(to_string(*cell->enforced_type)))
                                                   : Value::empty();
            }
            if (name == "overridden") return Value::boolean(cell && cell->overridden);
            if (name == "original") return cell && cell->original ? *cell->original : Value::empty();
            if (name == "address") return Value::text(c->addr.a1());
            if (name == "sheet") return SheetHandle{c->sheet};
        } else if (const auto* m = std::get_if<std::shared_ptr<Mapping>>(&o)) {
            if (name == "keys" || name == "values" || name == "items" || name == "get") return BoundMethod{*m, name};
        }
        throw Fault("AttributeError", ErrorKind::Name, "a " + kind_of(o) + " has no attribute '" + name + "'");
    }

    Object subscript(const Object& o, const Value& index) {
        if (std::holds_alternative<WorkbookHandle>(o)) {
            if (!index.is_text()) type_fault("sheet name must be Text");
            sheet_of(index.as_text());
            return SheetHandle{index.as_text()};
        }
        if (const auto* s = std::get_if<SheetHandle>(&o)) {
            sheet_of(s->sheet);
            return CellHandle{s->sheet, address_arg(Object(index))};
        }
        if (const auto* m = std::get_if<std::shared_ptr<Mapping>>(&o)) {
            if (Object* found = (*m)->find(index)) return *found;
            throw Fault("KeyError", ErrorKind::Ref, "key " + repr(Object(index)) + " not found");
        }
        const Value* v = std::get_if<Value>(&o);
        if (v && v->is_list()) {
            const auto& items = v->as_list().items;
            return items[list_index(index, items.size())];
        }
        type_fault("a " + kind_of(o) + " cannot be indexed");
    }

    static std::size_t list_index(const Value& index, std::size_t size) {
        if (!index.is_integer()) type_fault("list index must be Integer, got " + std::string(index.type_name()));
        std::int64_t i = index.as_integer();
        const auto n = static_cast<std::int64_t>(size);
        if (i < 0) i += n;
        if (i < 0 || i >= n) throw Fault("IndexError", ErrorKind::Ref, "list index out of range");
        return static_cast<std::size_t>(i);
    }

    void assign(const Expr& target, Object value) {
        if (const auto* n = std::get_if<NameExpr>(&target.node)) {
            bind(n->name, std::move(value));
            return;
        }
        if (const auto* a = std::get_if<AttributeExpr>(&target.node)) {
            set_attr(eval(*a->object), a->name, std::move(value));
            return;
        }
        const auto& sub = std::get<SubscriptExpr>(target.node);
        if (const auto* n = std::get_if<NameExpr>(&sub.object->node)) {
            if (const Object* o = lookup(n->name)) {
                if (const Value* v = std::get_if<Value>(o); v && v->is_list()) {
                    const Value index = eval_value(*sub.index);
                    std::vector<Value> items = v->as_list().items;
                    items[list_index(index, items.size())] = as_value(std::move(value), "stored in a list");
                    scope_for(n->name)[n->name] = Value::list(std::move(items));
                    return;
                }
            }
        }
        const Object object = eval(*sub.object);
        const Value index = eval_value(*sub.index);
        if (const auto* m = std::get_if<std::shared_ptr<Mapping>>(&object)) {
            if (Object* slot = (*m)->find(index)) {
                *slot = std::move(value);
            } else {
                (*m)->entries.emplace_back(index, std::move(value));
            }
            return;
        }
        if (std::holds_alternative<SheetHandle>(object)) {
            type_fault("assign through .value: sheet[\"A1\"].value = ...");
        }
        type_fault("a " + kind_of(object) + " does not support item assignment");
    }

    void set_attr(const Object& o, const std::string& name, Object value) {
        if (const auto* c = std::get_if<CellHandle>(&o)) {
            if (name == "value" || name == "Value") {
                store(*c, as_value(std::move(value), "stored in a cell"));
                return;
            }
            ResultSheet& sheet = sheet_of(c->sheet);
            if (name == "format") {
                const Value v = as_value(std::move(value), "used as a format");
                std::optional<FormatSpec> spec;
                if (v.is_text()) {
                    spec = FormatSpec::parse(v.as_text());
                    if (spec->is_default()) spec.reset();
                } else if (!v.is_empty()) {
                    type_fault("format must be Text");
                }
                sheet.cells[c->addr].format = spec;
                prune(sheet, c->addr);
                return;
            }
            if (name == "enforced_type") {
                const Value v = as_value(std::move(value), "used as a type");
                std::optional<EnforcedType> t;
                if (v.is_text()) {
                    t = parse_enforced_type(v.as_text());
                    if (!t) throw Fault("ValueError", ErrorKind::Value, "unknown type '" + v.as_text() + "'");
                } else if (!v.is_empty()) {
                    type_fault("enforced_type must be Text");
                }
                ResultCell& cell = sheet.cells[c->addr];
                cell.enforced_type = t;
                if (t && !cell.value.is_empty() && !cell.value.is_error()) {
                    try {
                        cell.value = coerce_to_type(cell.value, *t);
                    } catch (const TypeConformanceError& e) {
                        cell.value = Value::error(ErrorKind::Type, e.what());
                    }
                }
                prune(sheet, c->addr);
                return;
            }
        } else if (std::holds_alternative<WorkbookHandle>(o) && name == "locked") {
            const Value v = as_value(std::move(value), "used as a flag");
            if (!v.is_boolean()) type_fault("workbook.locked must be Boolean");
            locked_ = v.as_boolean();
            return;
        }
        throw Fault("AttributeError", ErrorKind::Name, "cannot set attribute '" + name + "' on a " + kind_of(o));
    }

    Object call_method(const BoundMethod& m, const std::vector<Object>& args, const Kwargs& kwargs) {
        auto expect = [&](std::size_t n) {
            if (args.size() != n) arity_fault(m.name, std::to_string(n), args.size());
        };
        if (std::holds_alternative<WorkbookHandle>(m.self)) {
            if (m.name == "add_sheet") {
                no_kwargs(kwargs, m.name);
                expect(1);
                const std::string& name = text_arg(args[0], "sheet name");
                if (!is_valid_sheet_name(name)) throw Fault("ValueError", ErrorKind::Value, "invalid sheet name '" + name + "'");
                if (result_.grid.find(name)) throw Fault("ValueError", ErrorKind::Value, "sheet '" + name + "' already exists");
                result_.grid.sheets.push_back(ResultSheet{name, {}, {}, {}});
                return SheetHandle{name};
            }
            if (m.name == "sheet_names") {
                no_kwargs(kwargs, m.name);
                expect(0);
                std::vector<Value> names;
                for (const auto& s : result_.grid.sheets) names.push_back(Value::text(s.name));
                return Value::list(std::move(names));
            }
            if (m.name == "union_cells") {
                no_kwargs(kwargs, m.name);
                BoundsRect b;
                for (const auto& a : args) {
                    const BoundsRect sb = sheet_of(text_arg(a, "sheet name")).bounds();
                    if (!sb.empty) {
                        include(b, sb.min);
                        include(b, sb.max);
                    }
                }
                return addresses_in(b);
            }
        } else if (const auto* s = std::get_if<SheetHandle>(&m.self)) {
            ResultSheet& sheet = sheet_of(s->sheet);
            if (m.name == "range") {
                no_kwargs(kwargs, m.name);
                expect(2);
                const CellRange r = CellRange::spanning(address_arg(args[0]), address_arg(args[1]));
                const std::uint64_t cells = static_cast<std::uint64_t>(r.to.column - r.from.column + 1) *
                                            static_cast<std::uint64_t>(r.to.row - r.from.row + 1);
                if (cells > kMaxRangeCells) {
                    return Value::error(ErrorKind::Ref, "range of " + std::to_string(cells) + " cells is too large");
                }
                charge(cells / 8);
                std::vector<Value> items;
                items.reserve(cells);
                for (int row = r.from.row; row <= r.to.row; ++row) {
                    for (int col = r.from.column; col <= r.to.column; ++col) {
                        items.push_back(sheet.value_at({col, row}));
                    }
                }
                return Value::list(std::move(items));
            }
            if (m.name == "column") {
                no_kwargs(kwargs, m.name);
                expect(1);
                const std::string& letters = text_arg(args[0], "column");
                auto col = parse_column_letters(letters);
                if (!col) throw Fault("ValueError", ErrorKind::Ref, "invalid column '" + letters + "'");
                const BoundsRect b = sheet.bounds();
                std::vector<Value> items;
                if (!b.empty) {
                    for (int row = b.min.row; row <= b.max.row; ++row) items.push_back(sheet.value_at({*col, row}));
                }
                charge(items.size() / 8);
                return Value::list(std::move(items));
            }
            if (m.name == "addresses") {
                no_kwargs(kwargs, m.name);
                expect(0);
                std::vector<Value> out;
                for (const auto& [addr, cell] : sheet.cells) {
                    if (!cell.value.is_empty()) out.push_back(Value::text(addr.a1()));
                }
                charge(out.size() / 8);
                return Value::list(std::move(out));
            }
            if (m.name == "load_csv") {
                bool header = false;
                if (args.empty() || args.size() > 2) arity_fault(m.name, "1 or 2", args.size());
                auto flag = [&](const Object& o) {
                    const Value* v = std::get_if<Value>(&o);
                    if (!v || !v->is_boolean()) type_fault("header must be Boolean");
                    header = v->as_boolean();
                };
                if (args.size() == 2) flag(args[1]);
                for (const auto& [k, v] : kwargs) {
                    if (k != "header") type_fault("load_csv() got an unexpected keyword argument '" + k + "'");
                    flag(v);
                }
                load_csv(sheet, text_arg(args[0], "path"), header);
                return Value::empty();
            }
            if (m.name == "column_format" || m.name == "row_format") {
                no_kwargs(kwargs, m.name);
                expect(2);
                const FormatSpec spec = FormatSpec::parse(text_arg(args[1], "format"));
                if (m.name == "column_format") {
                    const std::string& letters = text_arg(args[0], "column");
                    auto col = parse_column_letters(letters);
                    if (!col) throw Fault("ValueError", ErrorKind::Ref, "invalid column '" + letters + "'");
                    set_or_clear(sheet.column_formats, *col, spec);
                } else {
                    const Value* v = std::get_if<Value>(&args[0]);
                    if (!v || !v->is_integer() || v->as_integer() < 1 || v->as_integer() > kMaxRow) {
                        throw Fault("ValueError", ErrorKind::Ref, "row must be an Integer between 1 and " +
                                                                      std::to_string(kMaxRow));
                    }
                    set_or_clear(sheet.row_formats, static_cast<int>(v->as_integer()), spec);
                }
                return Value::empty();
            }
        } else if (const auto* mp = std::get_if<std::shared_ptr<Mapping>>(&m.self)) {
            no_kwargs(kwargs, m.name);
            const Mapping& map = **mp;
            if (m.name == "get") {
                if (args.empty() || args.size() > 2) arity_fault(m.name, "1 or 2", args.size());
                const Value key = as_value(args[0], "used as a key");
                if (const Object* found = (*mp)->find(key)) return *found;
                return args.size() == 2 ? args[1] : Object(Value::empty());
            }
            expect(0);
            std::vector<Value> out;
            for (const auto& [k, v] : map.entries) {
                if (m.name == "keys") {
                    out.push_back(k);
                } else if (m.name == "values") {
                    out.push_back(as_value(v, "stored in a list"));
                } else {
                    out.push_back(Value::list({k, as_value(v, "stored in a list")}));
                }
            }
            return Value::list(std::move(out));
        }
        throw Fault("AttributeError", ErrorKind::Name, "unknown method '" + m.name + "'");
    }

    static void set_or_clear(std::map<int, FormatSpec>& formats, int key, const FormatSpec& spec) {
        if (spec.is_default()) {
            formats.erase(key);
        } else {
            formats[key] = spec;
        }
    }

    Object addresses_in(const BoundsRect& b) {
        std::vector<Value> out;
        if (b.empty) return Value::list({});
        const std::uint64_t cells = static_cast<std::uint64_t>(b.max.column - b.min.column + 1) *
                                    static_cast<std::uint64_t>(b.max.row - b.min.row + 1);
        if (cells > kMaxRangeCells) {
            throw Fault("ValueError", ErrorKind::Ref, "union of " + std::to_string(cells) + " cells is too large");
        }
        charge(cells / 8);
        out.reserve(cells);
        for (int row = b.min.row; row <= b.max.row; ++row) {
            for (int col = b.min.column; col <= b.max.column; ++col) out.push_back(Value::text(CellAddress{col, row}.a1()));
        }
        return Value::list(std::move(out));
    }

    void load_csv(ResultSheet& sheet, const std::string& path, bool header) {
        std::filesystem::path resolved;
        try {
            resolved = confine_path(options_.data_root, path);
        } catch (const Error& e) {
            throw Fault("IOError", ErrorKind::Ref, e.what());
        }
        std::ifstream in(resolved, std::ios::binary);
        if (!in) throw Fault("IOError", ErrorKind::Ref, "cannot read '" + path + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        std::string text = buf.str();
        if (text.rfind("\xEF\xBB\xBF", 0) == 0) text.erase(0, 3);
        std::vector<CsvRow> rows;
        try {
            rows = parse_csv(text);
        } catch (const CsvError& e) {
            throw Fault("CsvError", ErrorKind::Value, "'" + path + "' " + e.what());
        }
        if (rows.size() > static_cast<std::size_t>(kMaxRow)) {
            throw Fault("CsvError", ErrorKind::Ref, "'" + path + "' has more rows than a sheet holds");
        }
        std::map<CellAddress, EnforcedType> types;
        for (const auto& [addr, cell] : sheet.cells) {
            if (cell.enforced_type) types[addr] = *cell.enforced_type;
        }
        sheet.cells.clear();
        for (const auto& [addr, t] : types) sheet.cells[addr].enforced_type = t;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            charge(1);
            if (rows[r].size() > static_cast<std::size_t>(kMaxColumn)) {
                throw Fault("CsvError", ErrorKind::Ref, "'" + path + "' row " + std::to_string(r + 1) +
                                                            " has more columns than a sheet holds");
            }
            for (std::size_t c = 0; c < rows[r].size(); ++c) {
                const std::string& field = rows[r][c];
                if (field.empty()) continue;
                const CellAddress addr{static_cast<int>(c) + 1, static_cast<int>(r) + 1};
                ResultCell& cell = sheet.cells[addr];
                Value v = header && r == 0 ? Value::text(field) : infer_literal(field);
                if (cell.enforced_type) {
                    if (*cell.enforced_type == EnforcedType::Text) {
                        v = Value::text(field);
                    } else {
                        try {
                            v = coerce_to_type(v, *cell.enforced_type);
                        } catch (const TypeConformanceError& e) {
                            v = Value::error(ErrorKind::Type, e.what());
                        }
                    }
                }
                cell.value = std::move(v);
            }
        }
    }

    ExecOptions options_;
    ExecutionResult result_;
    Scope globals_;
    std::vector<Frame> frames_;
    SectionKind section_ = SectionKind::Imports;
    Object return_value_ = Value::empty();
    std::uint64_t steps_ = 0;
    std::chrono::steady_clock::time_point start_;
    bool locked_ = false;
};

}  // namespace

ExecutionResult execute(const std::vector<SectionSource>& sections, const ExecOptions& options) {
    return Interpreter(options).run(sections);
}

ExecutionResult execute(const GeneratedProgram& program, const ExecOptions& options) {
    std::vector<SectionSource> sources;
    for (const auto& s : program.sections) sources.push_back({s.kind, s.text});
    return execute(sources, options);
}

}  // namespace tabula::script
