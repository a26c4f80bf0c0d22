package demo.io;
import java.io.File;
import java.io.IOException;
import java.util.List;

/**
 * Counts lines; "for" and class in this comment are ignored.
 */
public class LineCounter {
    private final File source = new File("data.txt");
    private int limit = 100; // upper bound

    @Override
    public String toString() {
        return "LineCounter(" + source.getName() + ")";
    }

    public int countLines(List<String> sink) throws IOException {
        int total = 0;
        try {
            total = sink.size();
        } catch (RuntimeException e) {
            total = -1;
        }
        if (total > limit) {
            total = limit;
        }
        return total;
    }
}
