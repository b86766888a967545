//! Canonical sample functions used across tests and documentation.

/// SARD-style stack buffer overflow: one branch routes `data` to an
/// undersized ALLOCA buffer and the copy then overruns it. Laid out so the
/// nine executable statements sit on source lines 1 through 9; the
/// triggering statement is the `memmove` on line 8.
pub const STACK_OVERFLOW_MEMMOVE: &str = "\
void CWE121_Stack_Based_Buffer_Overflow() { int * data;
    int * dataBadBuffer = (int *)ALLOCA(50*sizeof(int));
    int * dataGoodBuffer = (int *)ALLOCA(100*sizeof(int));
    if(globalReturnsTrueOrFalse()) {
        data = dataBadBuffer; }
    else { data = dataGoodBuffer; }
    { int source[100] = {0};
    memmove(data, source, 100*sizeof(int));
    printIntLine(data[0]); } }
";

/// Ground-truth triggering line of [`STACK_OVERFLOW_MEMMOVE`].
pub const STACK_OVERFLOW_MEMMOVE_SINK_LINE: u32 = 8;
