//! Recursive-descent parser for the C subset: one function definition with
//! declarations, assignments, if/else, calls, array subscripts, pointer
//! dereferences, arithmetic, and returns. `for`/`while` are accepted and
//! lowered to a condition node plus a CFG back edge later. Macro-style
//! calls (e.g. ALLOCA) parse as ordinary call expressions.

use super::lexer::{lex, TokKind, Token};
use super::{Ast, AstNode, FrontendError, NodeId, NodeKind};

const TYPE_WORDS: &[&str] = &[
    "void", "int", "char", "float", "double", "long", "short", "unsigned", "signed", "const",
    "wchar_t", "size_t",
];

const UNSUPPORTED: &[&str] = &[
    "goto", "switch", "case", "default", "do", "break", "continue", "struct", "union", "enum",
    "typedef", "static", "extern",
];

pub fn is_type_word(text: &str) -> bool {
    TYPE_WORDS.contains(&text)
}

/// Parse exactly one function definition into an AST.
pub fn parse_function(source: &str) -> Result<Ast, FrontendError> {
    let tokens = lex(source)?;
    let mut parser = Parser {
        source,
        tokens,
        pos: 0,
        nodes: Vec::new(),
        depth: 0,
    };
    let (root, name) = parser.function()?;
    let eof = parser.peek();
    if eof.kind != TokKind::Eof {
        return Err(parser.err_here("expected end of input after function body"));
    }
    Ok(Ast {
        nodes: parser.nodes,
        root,
        function_name: name,
    })
}

const MAX_NESTING: usize = 256;

struct Parser<'a> {
    source: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    nodes: Vec<AstNode>,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, off: usize) -> &Token {
        let idx = (self.pos + off).min(self.tokens.len() - 1);
        &self.tokens[idx]
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn err_here(&self, message: &str) -> FrontendError {
        let tok = self.peek();
        FrontendError::Syntax {
            line: tok.line,
            col: tok.col,
            message: if tok.kind == TokKind::Eof {
                format!("{message} (found end of input)")
            } else {
                format!("{message} (found {:?})", tok.text)
            },
        }
    }

    fn expect_sym(&mut self, sym: &str) -> Result<Token, FrontendError> {
        if self.peek().kind == TokKind::Sym && self.peek().text == sym {
            Ok(self.bump())
        } else {
            Err(self.err_here(&format!("expected {sym:?}")))
        }
    }

    fn at_sym(&self, sym: &str) -> bool {
        self.peek().kind == TokKind::Sym && self.peek().text == sym
    }

    fn add(&mut self, kind: NodeKind, code: String, line: u32) -> NodeId {
        let id = self.nodes.len() as NodeId;
        self.nodes.push(AstNode {
            id,
            kind,
            code,
            line,
            children: Vec::new(),
        });
        id
    }

    fn set_children(&mut self, id: NodeId, children: Vec<NodeId>) {
        self.nodes[id as usize].children = children;
    }

    fn span_text(&self, start: usize, end: usize) -> String {
        self.source[start..end].trim().to_string()
    }

    fn check_unsupported(&self) -> Result<(), FrontendError> {
        let tok = self.peek();
        if tok.kind == TokKind::Ident && UNSUPPORTED.contains(&tok.text.as_str()) {
            return Err(FrontendError::UnsupportedConstruct {
                line: tok.line,
                construct: tok.text.clone(),
            });
        }
        Ok(())
    }

    // type-words '*'*  — returns true if at least one type word was consumed
    fn eat_type(&mut self) -> bool {
        let mut any = false;
        while self.peek().kind == TokKind::Ident && is_type_word(&self.peek().text) {
            self.bump();
            any = true;
        }
        while self.at_sym("*") {
            self.bump();
        }
        any
    }

    fn function(&mut self) -> Result<(NodeId, String), FrontendError> {
        self.check_unsupported()?;
        let start = self.peek().start;
        let line = self.peek().line;
        if !self.eat_type() {
            return Err(self.err_here("expected return type"));
        }
        let name_tok = self.peek().clone();
        if name_tok.kind != TokKind::Ident {
            return Err(self.err_here("expected function name"));
        }
        self.bump();
        let params_start = self.peek().start;
        self.expect_sym("(")?;
        let func = self.add(NodeKind::Function, String::new(), line);
        let params = self.param_list(params_start)?;
        let sig_end = self.tokens[self.pos - 1].end;
        self.nodes[func as usize].code = self.span_text(start, sig_end);
        if !self.at_sym("{") {
            return Err(self.err_here("expected function body"));
        }
        let body = self.block()?;
        self.set_children(func, vec![params, body]);
        Ok((func, name_tok.text))
    }

    fn param_list(&mut self, start: usize) -> Result<NodeId, FrontendError> {
        let line = self.tokens[self.pos - 1].line;
        let list = self.add(NodeKind::ParamList, String::new(), line);
        let mut params = Vec::new();
        if !self.at_sym(")") {
            loop {
                params.push(self.param()?);
                if self.at_sym(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        let end_tok = self.expect_sym(")")?;
        self.nodes[list as usize].code = self.span_text(start, end_tok.end);
        self.set_children(list, params);
        Ok(list)
    }

    fn param(&mut self) -> Result<NodeId, FrontendError> {
        let start = self.peek().start;
        let line = self.peek().line;
        if !self.eat_type() {
            return Err(self.err_here("expected parameter type"));
        }
        // `void f(void)` has no parameter name
        if self.at_sym(")") {
            let end = self.tokens[self.pos - 1].end;
            let param = self.add(NodeKind::Param, self.span_text(start, end), line);
            return Ok(param);
        }
        let name_tok = self.peek().clone();
        if name_tok.kind != TokKind::Ident {
            return Err(self.err_here("expected parameter name"));
        }
        self.bump();
        if self.at_sym("[") {
            self.bump();
            if !self.at_sym("]") {
                self.expression()?;
            }
            self.expect_sym("]")?;
        }
        let end = self.tokens[self.pos - 1].end;
        let param = self.add(NodeKind::Param, self.span_text(start, end), line);
        let ident = self.add(NodeKind::Identifier, name_tok.text, name_tok.line);
        self.set_children(param, vec![ident]);
        Ok(param)
    }

    fn block(&mut self) -> Result<NodeId, FrontendError> {
        let line = self.peek().line;
        self.expect_sym("{")?;
        let block = self.add(NodeKind::Block, "{}".to_string(), line);
        let mut stmts = Vec::new();
        while !self.at_sym("}") {
            if self.peek().kind == TokKind::Eof {
                return Err(self.err_here("expected \"}\""));
            }
            self.statement_into(&mut stmts)?;
        }
        self.expect_sym("}")?;
        self.set_children(block, stmts);
        Ok(block)
    }

    /// Parse one statement, appending the produced node(s); `for` lowers to
    /// an init statement plus a loop node, hence potentially two entries.
    fn statement_into(&mut self, out: &mut Vec<NodeId>) -> Result<(), FrontendError> {
        self.depth += 1;
        let result = self.statement_inner(out);
        self.depth -= 1;
        result
    }

    fn statement_inner(&mut self, out: &mut Vec<NodeId>) -> Result<(), FrontendError> {
        if self.depth > MAX_NESTING {
            return Err(self.err_here("statement nesting too deep"));
        }
        self.check_unsupported()?;
        let tok = self.peek().clone();
        if self.at_sym(";") {
            self.bump();
            return Ok(());
        }
        if self.at_sym("{") {
            out.push(self.block()?);
            return Ok(());
        }
        if tok.kind == TokKind::Ident {
            match tok.text.as_str() {
                "if" => {
                    out.push(self.if_statement()?);
                    return Ok(());
                }
                "while" => {
                    out.push(self.while_statement()?);
                    return Ok(());
                }
                "for" => {
                    self.for_statement(out)?;
                    return Ok(());
                }
                "return" => {
                    out.push(self.return_statement()?);
                    return Ok(());
                }
                "else" => {
                    return Err(self.err_here("\"else\" without preceding \"if\""));
                }
                _ => {}
            }
            if is_type_word(&tok.text) {
                out.push(self.declaration()?);
                return Ok(());
            }
        }
        let stmt = self.simple_statement()?;
        self.expect_sym(";")?;
        out.push(stmt);
        Ok(())
    }

    fn declaration(&mut self) -> Result<NodeId, FrontendError> {
        let start = self.peek().start;
        let line = self.peek().line;
        self.eat_type();
        let name_tok = self.peek().clone();
        if name_tok.kind != TokKind::Ident || is_type_word(&name_tok.text) {
            return Err(self.err_here("expected declared name"));
        }
        self.bump();
        let name = self.add(NodeKind::Identifier, name_tok.text.clone(), name_tok.line);
        let mut children = vec![name];
        if self.at_sym("[") {
            self.bump();
            if !self.at_sym("]") {
                children.push(self.expression()?);
            }
            self.expect_sym("]")?;
        }
        if self.at_sym("=") {
            self.bump();
            if self.at_sym("{") {
                let init_start = self.peek().start;
                let init_line = self.peek().line;
                self.bump();
                let mut depth = 1;
                while depth > 0 {
                    if self.peek().kind == TokKind::Eof {
                        return Err(self.err_here("unterminated initializer"));
                    }
                    if self.at_sym("{") {
                        depth += 1;
                    } else if self.at_sym("}") {
                        depth -= 1;
                    }
                    let t = self.bump();
                    if depth == 0 {
                        let text = self.span_text(init_start, t.end);
                        children.push(self.add(NodeKind::Literal, text, init_line));
                    }
                }
            } else {
                children.push(self.expression()?);
            }
        }
        if self.at_sym(",") {
            let t = self.peek();
            return Err(FrontendError::UnsupportedConstruct {
                line: t.line,
                construct: "multiple declarators".to_string(),
            });
        }
        let semi = self.expect_sym(";")?;
        let decl = self.add(NodeKind::Decl, self.span_text(start, semi.start), line);
        self.set_children(decl, children);
        Ok(decl)
    }

    fn if_statement(&mut self) -> Result<NodeId, FrontendError> {
        let line = self.peek().line;
        self.bump(); // if
        let node = self.add(NodeKind::If, "if".to_string(), line);
        let cond = self.condition()?;
        let mut children = vec![cond];
        children.push(self.branch_arm()?);
        if self.peek().kind == TokKind::Ident && self.peek().text == "else" {
            let else_line = self.peek().line;
            self.bump();
            let else_node = self.add(NodeKind::Else, "else".to_string(), else_line);
            let arm = if self.peek().kind == TokKind::Ident && self.peek().text == "if" {
                self.if_statement()?
            } else {
                self.branch_arm()?
            };
            self.set_children(else_node, vec![arm]);
            children.push(else_node);
        }
        self.set_children(node, children);
        Ok(node)
    }

    fn while_statement(&mut self) -> Result<NodeId, FrontendError> {
        let line = self.peek().line;
        self.bump(); // while
        let node = self.add(NodeKind::If, "while".to_string(), line);
        let cond = self.condition()?;
        let body = self.branch_arm()?;
        self.set_children(node, vec![cond, body]);
        Ok(node)
    }

    /// `for (init; cond; step)` lowers to `init; while (cond) { body; step; }`.
    fn for_statement(&mut self, out: &mut Vec<NodeId>) -> Result<(), FrontendError> {
        let line = self.peek().line;
        self.bump(); // for
        self.expect_sym("(")?;
        if !self.at_sym(";") {
            let init = if self.peek().kind == TokKind::Ident && is_type_word(&self.peek().text) {
                // declaration consumes its own semicolon
                let decl = self.for_init_declaration()?;
                out.push(decl);
                None
            } else {
                Some(self.simple_statement()?)
            };
            if let Some(init) = init {
                self.expect_sym(";")?;
                out.push(init);
            }
        } else {
            self.bump();
        }
        let cond_start = self.peek().start;
        let cond_line = self.peek().line;
        let node = self.add(NodeKind::If, "for".to_string(), line);
        let cond = if self.at_sym(";") {
            // missing condition would loop forever; represent as literal 1
            self.add(NodeKind::Literal, "1".to_string(), cond_line)
        } else {
            self.expression()?
        };
        let cond_end = self.tokens[self.pos - 1].end;
        let cond_node = self.add(
            NodeKind::Condition,
            self.span_text(cond_start, cond_end),
            cond_line,
        );
        self.set_children(cond_node, vec![cond]);
        self.expect_sym(";")?;
        let step = if self.at_sym(")") {
            None
        } else {
            Some(self.simple_statement()?)
        };
        self.expect_sym(")")?;
        let body = self.branch_arm()?;
        let loop_body = match step {
            Some(step) => {
                let line = self.nodes[body as usize].line;
                let wrapper = self.add(NodeKind::Block, "{}".to_string(), line);
                self.set_children(wrapper, vec![body, step]);
                wrapper
            }
            None => body,
        };
        self.set_children(node, vec![cond_node, loop_body]);
        out.push(node);
        Ok(())
    }

    fn for_init_declaration(&mut self) -> Result<NodeId, FrontendError> {
        self.declaration()
    }

    fn branch_arm(&mut self) -> Result<NodeId, FrontendError> {
        if self.at_sym("{") {
            self.block()
        } else {
            let mut tmp = Vec::new();
            self.statement_into(&mut tmp)?;
            match tmp.len() {
                1 => Ok(tmp[0]),
                _ => {
                    // a lowered `for` in unbraced position needs a wrapper
                    let line = tmp
                        .first()
                        .map(|&id| self.nodes[id as usize].line)
                        .unwrap_or(self.peek().line);
                    let block = self.add(NodeKind::Block, "{}".to_string(), line);
                    self.set_children(block, tmp);
                    Ok(block)
                }
            }
        }
    }

    fn condition(&mut self) -> Result<NodeId, FrontendError> {
        self.expect_sym("(")?;
        let start = self.peek().start;
        let line = self.peek().line;
        let expr = self.expression()?;
        let end = self.tokens[self.pos - 1].end;
        self.expect_sym(")")?;
        let cond = self.add(NodeKind::Condition, self.span_text(start, end), line);
        self.set_children(cond, vec![expr]);
        Ok(cond)
    }

    fn return_statement(&mut self) -> Result<NodeId, FrontendError> {
        let start = self.peek().start;
        let line = self.peek().line;
        self.bump(); // return
        let mut children = Vec::new();
        if !self.at_sym(";") {
            children.push(self.expression()?);
        }
        let semi = self.expect_sym(";")?;
        let node = self.add(NodeKind::Return, self.span_text(start, semi.start), line);
        self.set_children(node, children);
        Ok(node)
    }

    /// Assignment, compound assignment, increment/decrement, or call.
    fn simple_statement(&mut self) -> Result<NodeId, FrontendError> {
        self.check_unsupported()?;
        let start = self.peek().start;
        let line = self.peek().line;
        if self.at_sym("++") || self.at_sym("--") {
            self.bump();
            let target = self.unary()?;
            let end = self.tokens[self.pos - 1].end;
            let node = self.add(NodeKind::Assign, self.span_text(start, end), line);
            self.set_children(node, vec![target]);
            return Ok(node);
        }
        let target = self.unary()?;
        let tok = self.peek().clone();
        if tok.kind == TokKind::Sym {
            match tok.text.as_str() {
                "=" | "+=" | "-=" | "*=" | "/=" | "%=" => {
                    self.bump();
                    let rhs = self.expression()?;
                    let end = self.tokens[self.pos - 1].end;
                    let node = self.add(NodeKind::Assign, self.span_text(start, end), line);
                    self.set_children(node, vec![target, rhs]);
                    return Ok(node);
                }
                "++" | "--" => {
                    self.bump();
                    let end = self.tokens[self.pos - 1].end;
                    let node = self.add(NodeKind::Assign, self.span_text(start, end), line);
                    self.set_children(node, vec![target]);
                    return Ok(node);
                }
                _ => {}
            }
        }
        if self.nodes[target as usize].kind == NodeKind::Call {
            return Ok(target);
        }
        Err(self.err_here("expected statement (assignment or call)"))
    }

    // --- expressions -----------------------------------------------------

    fn expression(&mut self) -> Result<NodeId, FrontendError> {
        self.binary(0)
    }

    fn binary_ops(level: usize) -> &'static [&'static str] {
        match level {
            0 => &["||"],
            1 => &["&&"],
            2 => &["|"],
            3 => &["^"],
            4 => &["&"],
            5 => &["==", "!="],
            6 => &["<", ">", "<=", ">="],
            7 => &["<<", ">>"],
            8 => &["+", "-"],
            9 => &["*", "/", "%"],
            _ => &[],
        }
    }

    fn binary(&mut self, level: usize) -> Result<NodeId, FrontendError> {
        if Self::binary_ops(level).is_empty() {
            return self.unary();
        }
        let start = self.peek().start;
        let line = self.peek().line;
        let mut lhs = self.binary(level + 1)?;
        loop {
            let tok = self.peek().clone();
            if tok.kind == TokKind::Sym && Self::binary_ops(level).contains(&tok.text.as_str()) {
                self.bump();
                let rhs = self.binary(level + 1)?;
                let end = self.tokens[self.pos - 1].end;
                let node = self.add(NodeKind::BinaryOp, self.span_text(start, end), line);
                self.set_children(node, vec![lhs, rhs]);
                lhs = node;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn is_cast_ahead(&self) -> bool {
        self.at_sym("(")
            && self.peek_at(1).kind == TokKind::Ident
            && is_type_word(&self.peek_at(1).text)
    }

    fn unary(&mut self) -> Result<NodeId, FrontendError> {
        self.depth += 1;
        let result = self.unary_inner();
        self.depth -= 1;
        result
    }

    fn unary_inner(&mut self) -> Result<NodeId, FrontendError> {
        if self.depth > MAX_NESTING {
            return Err(self.err_here("expression nesting too deep"));
        }
        let tok = self.peek().clone();
        let start = tok.start;
        if tok.kind == TokKind::Sym {
            match tok.text.as_str() {
                "*" => {
                    self.bump();
                    let operand = self.unary()?;
                    let end = self.tokens[self.pos - 1].end;
                    let node =
                        self.add(NodeKind::PointerDeref, self.span_text(start, end), tok.line);
                    self.set_children(node, vec![operand]);
                    return Ok(node);
                }
                "!" | "-" | "+" | "~" | "&" => {
                    self.bump();
                    let operand = self.unary()?;
                    let end = self.tokens[self.pos - 1].end;
                    let node = self.add(NodeKind::UnaryOp, self.span_text(start, end), tok.line);
                    self.set_children(node, vec![operand]);
                    return Ok(node);
                }
                "(" if self.is_cast_ahead() => {
                    self.bump();
                    if !self.eat_type() {
                        return Err(self.err_here("expected type in cast"));
                    }
                    self.expect_sym(")")?;
                    let operand = self.unary()?;
                    let end = self.tokens[self.pos - 1].end;
                    let node = self.add(NodeKind::UnaryOp, self.span_text(start, end), tok.line);
                    self.set_children(node, vec![operand]);
                    return Ok(node);
                }
                _ => {}
            }
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<NodeId, FrontendError> {
        let start = self.peek().start;
        let line = self.peek().line;
        let mut node = self.primary()?;
        loop {
            if self.at_sym("[") {
                self.bump();
                let index = self.expression()?;
                let close = self.expect_sym("]")?;
                let sub = self.add(
                    NodeKind::ArraySubscript,
                    self.span_text(start, close.end),
                    line,
                );
                self.set_children(sub, vec![node, index]);
                node = sub;
            } else if self.at_sym("(") {
                if self.nodes[node as usize].kind != NodeKind::Identifier {
                    return Err(self.err_here("calls through non-identifiers are not supported"));
                }
                let args_start = self.peek().start;
                self.bump();
                let mut args = Vec::new();
                if !self.at_sym(")") {
                    loop {
                        args.push(self.expression()?);
                        if self.at_sym(",") {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                let close = self.expect_sym(")")?;
                let arg_list = self.add(NodeKind::ArgList, self.span_text(args_start, close.end), line);
                self.set_children(arg_list, args);
                let call = self.add(NodeKind::Call, self.span_text(start, close.end), line);
                self.set_children(call, vec![node, arg_list]);
                node = call;
            } else {
                return Ok(node);
            }
        }
    }

    fn primary(&mut self) -> Result<NodeId, FrontendError> {
        self.check_unsupported()?;
        let tok = self.peek().clone();
        match tok.kind {
            TokKind::Ident => {
                self.bump();
                Ok(self.add(NodeKind::Identifier, tok.text, tok.line))
            }
            TokKind::Number | TokKind::CharLit | TokKind::StrLit => {
                self.bump();
                Ok(self.add(NodeKind::Literal, tok.text, tok.line))
            }
            TokKind::Sym if tok.text == "(" => {
                self.bump();
                let inner = self.expression()?;
                self.expect_sym(")")?;
                Ok(inner)
            }
            _ => Err(self.err_here("expected expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::samples::STACK_OVERFLOW_MEMMOVE;

    fn statement_lines(ast: &Ast) -> Vec<u32> {
        ast.statement_ids()
            .iter()
            .map(|&id| ast.node(id).line)
            .collect()
    }

    #[test]
    fn minimal_program_has_decl_and_assign_on_line_one() {
        let ast = parse_function("void f(){int x; x = 1;}").unwrap();
        let stmts = ast.statement_ids();
        assert_eq!(stmts.len(), 2);
        let kinds: Vec<NodeKind> = stmts.iter().map(|&id| ast.node(id).kind).collect();
        assert_eq!(kinds, vec![NodeKind::Decl, NodeKind::Assign]);
        assert_eq!(statement_lines(&ast), vec![1, 1]);
        assert_eq!(ast.function_name, "f");
    }

    #[test]
    fn worked_example_has_nine_statements_on_lines_one_through_nine() {
        let ast = parse_function(STACK_OVERFLOW_MEMMOVE).unwrap();
        assert_eq!(statement_lines(&ast), vec![1, 2, 3, 4, 5, 6, 7, 8, 9]);
    }

    #[test]
    fn missing_rhs_is_a_syntax_error_at_the_semicolon() {
        let err = parse_function("void f(){x = ;}").unwrap_err();
        match err {
            FrontendError::Syntax { line, col, .. } => {
                assert_eq!(line, 1);
                assert_eq!(col, 14);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn goto_is_reported_as_unsupported() {
        let err = parse_function("void f(){goto end;}").unwrap_err();
        match err {
            FrontendError::UnsupportedConstruct { construct, .. } => {
                assert_eq!(construct, "goto");
            }
            other => panic!("expected unsupported construct, got {other:?}"),
        }
    }

    #[test]
    fn call_statement_text_excludes_semicolon() {
        let ast = parse_function("void f(){memmove(a, b, 4*sizeof(int));}").unwrap();
        let call = ast
            .nodes
            .iter()
            .find(|n| n.kind == NodeKind::Call && ast.is_statement(n.id))
            .unwrap();
        assert_eq!(call.code, "memmove(a, b, 4*sizeof(int))");
    }

    #[test]
    fn cast_parses_as_unary_wrapper() {
        let ast = parse_function("void f(){int * p = (int *)ALLOCA(8);}").unwrap();
        assert!(ast.nodes.iter().any(|n| n.kind == NodeKind::UnaryOp));
        assert!(ast
            .nodes
            .iter()
            .any(|n| n.kind == NodeKind::Call && n.code.starts_with("ALLOCA")));
    }

    #[test]
    fn for_loop_lowers_to_init_plus_loop_node() {
        let ast = parse_function("void f(){int i; for (i = 0; i < 4; i++) { g(i); }}").unwrap();
        let loop_node = ast
            .nodes
            .iter()
            .find(|n| n.kind == NodeKind::If && n.code == "for")
            .unwrap();
        assert_eq!(loop_node.children.len(), 2);
        // init assignment became a sibling statement
        assert!(ast
            .nodes
            .iter()
            .any(|n| n.kind == NodeKind::Assign && n.code == "i = 0"));
        // step ended up inside the loop body wrapper
        assert!(ast
            .nodes
            .iter()
            .any(|n| n.kind == NodeKind::Assign && n.code == "i++"));
    }

    #[test]
    fn multiple_declarators_are_unsupported() {
        let err = parse_function("void f(){int a = 1, b = 2;}").unwrap_err();
        assert!(matches!(err, FrontendError::UnsupportedConstruct { .. }));
    }

    #[test]
    fn else_if_chains_parse() {
        let ast =
            parse_function("void f(){int x; if (a) { x = 1; } else if (b) { x = 2; } else { x = 3; }}")
                .unwrap();
        let conds = ast
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Condition)
            .count();
        assert_eq!(conds, 2);
        let assigns = ast
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Assign)
            .count();
        assert_eq!(assigns, 3);
    }
}
