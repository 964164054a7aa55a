package fx.twosites;

import com.thoughtworks.xstream.XStream;

public class DualReader {
    public void readBoth(String first, String second) {
        XStream xs = new XStream();
        xs.fromXML(first);
        xs.fromXML(second);
    }
}
